//! Trapezoidal fuzzy sets, linguistic variables, norm operators, and
//! centroid defuzzification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples used by the centroid defuzzifier (uniform over the universe).
pub const CENTROID_SAMPLES: usize = 1001;

/// Tolerance for the partition-of-unity check on a variable's terms.
pub const PARTITION_TOLERANCE: f64 = 1e-9;

/// Trapezoidal membership function with knots `a <= b <= c <= d`: zero at or
/// below `a`, linear rise to one at `b`, plateau through `c`, linear fall to
/// zero at `d`. Shoulder terms use `a == b` or `c == d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipFunction {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl MembershipFunction {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let finite = a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite();
        if !finite || !(a <= b && b <= c && c <= d) {
            return Err(Error::InvalidTrapezoid { a, b, c, d });
        }
        Ok(Self { a, b, c, d })
    }

    pub fn knots(&self) -> (f64, f64, f64, f64) {
        (self.a, self.b, self.c, self.d)
    }

    /// Degree of membership of `x`, always in [0, 1]. The plateau is tested
    /// first so zero-width ramps (shoulders) evaluate to 1 on their edge.
    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.b && x <= self.c {
            1.0
        } else if x <= self.a || x >= self.d {
            0.0
        } else if x < self.b {
            (x - self.a) / (self.b - self.a)
        } else {
            (self.d - x) / (self.d - self.c)
        }
    }
}

/// Per-term membership degrees, ordered as the owning variable's terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeVector(pub Vec<f64>);

impl DegreeVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Named variable whose terms form a fuzzy partition of a closed universe:
/// memberships sum to one at every universe point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticVariable {
    name: String,
    lo: f64,
    hi: f64,
    terms: Vec<(String, MembershipFunction)>,
}

impl LinguisticVariable {
    pub fn new(
        name: &str,
        universe: (f64, f64),
        terms: Vec<(String, MembershipFunction)>,
    ) -> Result<Self> {
        let (lo, hi) = universe;
        let fail = |reason: String| Error::InvalidVariable {
            variable: name.to_string(),
            reason,
        };
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(fail(format!(
                "universe [{lo}, {hi}] is not a proper interval"
            )));
        }
        if terms.is_empty() {
            return Err(fail("no terms".to_string()));
        }
        for (label, mf) in &terms {
            let (a, _, _, d) = mf.knots();
            if a < lo || d > hi {
                return Err(fail(format!(
                    "term '{label}' support [{a}, {d}] outside universe [{lo}, {hi}]"
                )));
            }
        }
        for (i, (label, _)) in terms.iter().enumerate() {
            if terms[..i].iter().any(|(other, _)| other == label) {
                return Err(fail(format!("duplicate term label '{label}'")));
            }
        }
        let var = Self {
            name: name.to_string(),
            lo,
            hi,
            terms,
        };
        var.check_partition()?;
        Ok(var)
    }

    /// Exact partition check. The term sum is piecewise linear with breaks
    /// only at trapezoid knots, so equality to 1 at every knot and every
    /// span midpoint proves it on the whole universe.
    fn check_partition(&self) -> Result<()> {
        let mut points: Vec<f64> = vec![self.lo, self.hi];
        for (_, mf) in &self.terms {
            let (a, b, c, d) = mf.knots();
            points.extend_from_slice(&[a, b, c, d]);
        }
        points.retain(|x| *x >= self.lo && *x <= self.hi);
        points.sort_by(|p, q| p.partial_cmp(q).unwrap());
        points.dedup();
        let mut checks = points.clone();
        for pair in points.windows(2) {
            checks.push(0.5 * (pair[0] + pair[1]));
        }
        for x in checks {
            let sum: f64 = self.terms.iter().map(|(_, mf)| mf.eval(x)).sum();
            if (sum - 1.0).abs() > PARTITION_TOLERANCE {
                return Err(Error::InvalidVariable {
                    variable: self.name.clone(),
                    reason: format!("terms sum to {sum} at x = {x}, expected 1"),
                });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn universe(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn terms(&self) -> &[(String, MembershipFunction)] {
        &self.terms
    }

    pub fn term_index(&self, label: &str) -> Option<usize> {
        self.terms.iter().position(|(l, _)| l == label)
    }

    /// Clamp `x` into the universe, then evaluate every term.
    pub fn fuzzify(&self, x: f64) -> DegreeVector {
        let x = x.clamp(self.lo, self.hi);
        DegreeVector(self.terms.iter().map(|(_, mf)| mf.eval(x)).collect())
    }

    /// Clamp `x` into the universe (the same clamp `fuzzify` applies).
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// Binary intersection operators on degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TNorm {
    Product,
    Min,
}

impl TNorm {
    pub fn apply(self, u: f64, v: f64) -> f64 {
        match self {
            TNorm::Product => u * v,
            TNorm::Min => u.min(v),
        }
    }
}

impl std::str::FromStr for TNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(TNorm::Product),
            "min" => Ok(TNorm::Min),
            other => Err(Error::Config(format!(
                "unknown t-norm '{other}' (expected 'product' or 'min')"
            ))),
        }
    }
}

/// Binary union operators on degrees, duals of [`TNorm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SNorm {
    ProbabilisticSum,
    Max,
}

impl SNorm {
    pub fn apply(self, u: f64, v: f64) -> f64 {
        match self {
            SNorm::ProbabilisticSum => u + v - u * v,
            SNorm::Max => u.max(v),
        }
    }
}

pub fn complement(u: f64) -> f64 {
    1.0 - u
}

/// Centroid of the max-clipped aggregate membership curve, sampled at
/// [`CENTROID_SAMPLES`] uniform points. Errors when nothing is activated.
pub fn centroid_defuzzify(var: &LinguisticVariable, degrees: &DegreeVector) -> Result<f64> {
    if degrees.len() != var.terms().len() {
        return Err(Error::DegreeArity {
            variable: var.name().to_string(),
            want: var.terms().len(),
            got: degrees.len(),
        });
    }
    if degrees.0.iter().all(|&d| d == 0.0) {
        return Err(Error::NoActivation);
    }
    let (lo, hi) = var.universe();
    let step = (hi - lo) / (CENTROID_SAMPLES - 1) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..CENTROID_SAMPLES {
        let x = lo + step * k as f64;
        let mut mu = 0.0f64;
        for (deg, (_, mf)) in degrees.0.iter().zip(var.terms()) {
            mu = mu.max(deg.min(mf.eval(x)));
        }
        num += x * mu;
        den += mu;
    }
    if den == 0.0 {
        // Degrees were positive but every sample missed their supports.
        return Err(Error::NoActivation);
    }
    Ok((num / den).clamp(lo, hi))
}

/// Pinned term order for the accent variable.
pub const ACCENT_TERMS: [&str; 2] = ["soft", "sharp"];
/// Pinned term order for the speed variable.
pub const SPEED_TERMS: [&str; 3] = ["slow", "normal", "fast"];
/// Pinned term order for the emphasis variable.
pub const EMPHASIS_TERMS: [&str; 3] = ["light", "medium", "heavy"];

/// The three shipped linguistic variables with pinned term names and order.
///
/// Universes: accent over the high-frequency energy ratio [0, 1]; speed over
/// v = log2(rate) in [-2, 2]; emphasis over the dB offset from the utterance
/// mean in [-20, 20].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSet {
    pub accent: LinguisticVariable,
    pub speed: LinguisticVariable,
    pub emphasis: LinguisticVariable,
}

impl Default for VariableSet {
    fn default() -> Self {
        let mf = |a, b, c, d| MembershipFunction::new(a, b, c, d).unwrap();
        let accent = LinguisticVariable::new(
            "accent",
            (0.0, 1.0),
            vec![
                ("soft".to_string(), mf(0.0, 0.0, 0.3, 0.6)),
                ("sharp".to_string(), mf(0.3, 0.6, 1.0, 1.0)),
            ],
        )
        .unwrap();
        let speed = LinguisticVariable::new(
            "speed",
            (-2.0, 2.0),
            vec![
                ("slow".to_string(), mf(-2.0, -2.0, -0.8, -0.2)),
                ("normal".to_string(), mf(-0.8, -0.2, 0.2, 0.8)),
                ("fast".to_string(), mf(0.2, 0.8, 2.0, 2.0)),
            ],
        )
        .unwrap();
        let emphasis = LinguisticVariable::new(
            "emphasis",
            (-20.0, 20.0),
            vec![
                ("light".to_string(), mf(-20.0, -20.0, -9.0, -3.0)),
                ("medium".to_string(), mf(-9.0, -3.0, 3.0, 9.0)),
                ("heavy".to_string(), mf(3.0, 9.0, 20.0, 20.0)),
            ],
        )
        .unwrap();
        Self {
            accent,
            speed,
            emphasis,
        }
    }
}

impl VariableSet {
    /// Load overrides from flat key-value text. Schema per variable:
    ///
    /// ```text
    /// speed.universe = -2 2
    /// speed.term.slow = -2 -2 -0.8 -0.2
    /// ```
    ///
    /// A variable is either fully specified (universe plus every pinned
    /// term) or omitted entirely and left at its default. Term names and
    /// their order are pinned; unknown keys are rejected.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            entries.push((key.trim().to_string(), value.trim().to_string()));
        }

        let mut set = VariableSet::default();
        for (var_name, pinned) in [
            ("accent", &ACCENT_TERMS[..]),
            ("speed", &SPEED_TERMS[..]),
            ("emphasis", &EMPHASIS_TERMS[..]),
        ] {
            let prefix = format!("{var_name}.");
            let own: Vec<&(String, String)> = entries
                .iter()
                .filter(|(k, _)| k.starts_with(&prefix))
                .collect();
            if own.is_empty() {
                continue;
            }
            let mut universe: Option<(f64, f64)> = None;
            let mut quads: Vec<Option<MembershipFunction>> = vec![None; pinned.len()];
            for (key, value) in own {
                let field = &key[prefix.len()..];
                if field == "universe" {
                    let nums = parse_numbers(key, value, 2)?;
                    universe = Some((nums[0], nums[1]));
                } else if let Some(term) = field.strip_prefix("term.") {
                    let idx = pinned.iter().position(|t| *t == term).ok_or_else(|| {
                        Error::Config(format!(
                            "unknown term '{term}' for variable '{var_name}' (expected one of {pinned:?})"
                        ))
                    })?;
                    let nums = parse_numbers(key, value, 4)?;
                    quads[idx] = Some(MembershipFunction::new(nums[0], nums[1], nums[2], nums[3])?);
                } else {
                    return Err(Error::Config(format!("unknown key '{key}'")));
                }
            }
            let universe = universe.ok_or_else(|| {
                Error::Config(format!(
                    "variable '{var_name}': missing '{var_name}.universe'"
                ))
            })?;
            let mut terms = Vec::with_capacity(pinned.len());
            for (idx, term) in pinned.iter().enumerate() {
                let mf = quads[idx].ok_or_else(|| {
                    Error::Config(format!(
                        "variable '{var_name}': missing '{var_name}.term.{term}'"
                    ))
                })?;
                terms.push((term.to_string(), mf));
            }
            let var = LinguisticVariable::new(var_name, universe, terms)?;
            match var_name {
                "accent" => set.accent = var,
                "speed" => set.speed = var,
                _ => set.emphasis = var,
            }
        }

        // Anything not claimed by one of the three variables is unknown.
        for (key, _) in &entries {
            if !["accent.", "speed.", "emphasis."]
                .iter()
                .any(|p| key.starts_with(p))
            {
                return Err(Error::Config(format!("unknown key '{key}'")));
            }
        }
        Ok(set)
    }
}

fn parse_numbers(key: &str, value: &str, want: usize) -> Result<Vec<f64>> {
    let nums: Vec<f64> = value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Config(format!("key '{key}': '{tok}' is not a number")))
        })
        .collect::<Result<_>>()?;
    if nums.len() != want {
        return Err(Error::Config(format!(
            "key '{key}': expected {want} numbers, got {}",
            nums.len()
        )));
    }
    Ok(nums)
}
