//! Per-segment fuzzy profiling along speed, emphasis, and accent, and the
//! fuzzy-weighted normalization filter. Every filtered segment emits a
//! side-channel record preserving the unfiltered profile and the applied
//! corrections.

use serde::{Deserialize, Serialize};

use crate::audio::{FeatureFrame, FramingConfig, ENERGY_FLOOR_DB, NUM_BANDS};
use crate::endpoint::Segment;
use crate::error::{Error, Result};
use crate::fuzzy::VariableSet;

/// Frames at or below this log-energy are excluded from the accent crisp
/// value; endpointed segments always contain louder frames.
pub const QUIET_FRAME_DB: f64 = -60.0;

/// Correction weights below this are treated as exactly zero, so a
/// profile-neutral segment short-circuits to a bit-identical copy instead
/// of accumulating one-ulp corrections from membership rounding.
pub const WEIGHT_EPSILON: f64 = 1e-9;

/// Bisection limit for the tilt slope, dB across the half band span
/// (band 7 shifts by +slope, band 0 by -slope).
pub const TILT_SLOPE_LIMIT_DB: f64 = 24.0;

/// The tilt search stops when the band-derived ratio is this close to its
/// target.
pub const TILT_RATIO_TOLERANCE: f64 = 0.01;

/// Crisp value and degrees for the accent variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccentProfile {
    pub crisp: f64,
    pub soft: f64,
    pub sharp: f64,
}

/// Crisp value and degrees for the speed variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub crisp: f64,
    pub slow: f64,
    pub normal: f64,
    pub fast: f64,
}

/// Crisp value and degrees for the emphasis variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmphasisProfile {
    pub crisp: f64,
    pub light: f64,
    pub medium: f64,
    pub heavy: f64,
}

/// Fuzzy description of one segment along the three axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParalinguisticProfile {
    pub accent: AccentProfile,
    pub speed: SpeedProfile,
    pub emphasis: EmphasisProfile,
}

/// Attenuation strengths derived from a profile, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub speed: f64,
    pub emphasis: f64,
    pub accent: f64,
}

/// Crisp corrections a filter pass applied to one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSet {
    /// Frame-count multiplier; 1.0 means untouched.
    pub resample_factor: f64,
    /// dB subtracted from every energy entry; 0.0 means untouched.
    pub gain_shift_db: f64,
    /// dB per band index step: band k shifted by this times (k - 3.5).
    /// 0.0 means untouched.
    pub tilt_db_per_band: f64,
}

impl CorrectionSet {
    pub fn is_zero(&self) -> bool {
        self.resample_factor == 1.0 && self.gain_shift_db == 0.0 && self.tilt_db_per_band == 0.0
    }
}

/// The preserved side channel for one filtered segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParalinguisticRecord {
    pub segment: usize,
    pub before: ParalinguisticProfile,
    pub corrections: CorrectionSet,
    pub after: ParalinguisticProfile,
    /// Speed reference the segment was normalized toward, in frames.
    pub reference_frames: f64,
}

/// Spectral parameters the filter needs beyond the variables themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Accent ratio the tilt correction steers toward (the soft/sharp
    /// crossover midpoint).
    pub tilt_target: f64,
    /// First analysis band whose lower edge reaches the HF cutoff.
    pub hf_band_start: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            tilt_target: 0.45,
            hf_band_start: 2,
        }
    }
}

impl FilterParams {
    pub fn for_rate(framing: &FramingConfig, sample_rate: u32, tilt_target: f64) -> Self {
        let band_width = sample_rate as f64 / 2.0 / NUM_BANDS as f64;
        let hf_band_start = ((framing.hf_cutoff_hz / band_width).ceil() as usize).min(NUM_BANDS);
        Self {
            tilt_target,
            hf_band_start,
        }
    }
}

/// Measure one segment against the speed reference and the utterance mean
/// energy, and fuzzify the three crisp values.
///
/// Speed: v = log2(reference / duration), so a segment longer than the
/// reference reads as slow (v < 0). Emphasis: e = segment mean log-energy
/// minus the utterance mean. Accent: mean hf_ratio over frames louder than
/// [`QUIET_FRAME_DB`]. Crisp values are clamped into their universes.
pub fn profile_segment(
    seg: &Segment,
    reference_frames: f64,
    utterance_mean_db: f64,
    vars: &VariableSet,
) -> Result<ParalinguisticProfile> {
    if seg.frames.is_empty() {
        return Err(Error::EmptySegment);
    }
    if reference_frames.is_nan() || reference_frames <= 0.0 {
        return Err(Error::Config(format!(
            "speed reference must be positive, got {reference_frames}"
        )));
    }

    let v = vars
        .speed
        .clamp((reference_frames / seg.frames.len() as f64).log2());
    let e = vars
        .emphasis
        .clamp(seg.mean_log_energy() - utterance_mean_db);
    let loud: Vec<f64> = seg
        .frames
        .iter()
        .filter(|f| f.log_energy > QUIET_FRAME_DB)
        .map(|f| f.hf_ratio)
        .collect();
    let ratios: Vec<f64> = if loud.is_empty() {
        seg.frames.iter().map(|f| f.hf_ratio).collect()
    } else {
        loud
    };
    let r = vars
        .accent
        .clamp(ratios.iter().sum::<f64>() / ratios.len() as f64);

    let acc = vars.accent.fuzzify(r);
    let spd = vars.speed.fuzzify(v);
    let emp = vars.emphasis.fuzzify(e);
    Ok(ParalinguisticProfile {
        accent: AccentProfile {
            crisp: r,
            soft: acc.0[0],
            sharp: acc.0[1],
        },
        speed: SpeedProfile {
            crisp: v,
            slow: spd.0[0],
            normal: spd.0[1],
            fast: spd.0[2],
        },
        emphasis: EmphasisProfile {
            crisp: e,
            light: emp.0[0],
            medium: emp.0[1],
            heavy: emp.0[2],
        },
    })
}

fn snap(w: f64) -> f64 {
    if w < WEIGHT_EPSILON {
        0.0
    } else {
        w
    }
}

/// Attenuation strengths: distance from the neutral term for speed and
/// emphasis, imbalance between the accent terms.
pub fn correction_weights(p: &ParalinguisticProfile) -> Weights {
    Weights {
        speed: snap(1.0 - p.speed.normal),
        emphasis: snap(1.0 - p.emphasis.medium),
        accent: snap((p.accent.sharp - p.accent.soft).abs()),
    }
}

fn lerp(x: f64, y: f64, t: f64) -> f64 {
    x + (y - x) * t
}

fn lerp_frame(a: &FeatureFrame, b: &FeatureFrame, t: f64) -> FeatureFrame {
    let mut band_energies = [0.0; NUM_BANDS];
    for (k, out) in band_energies.iter_mut().enumerate() {
        *out = lerp(a.band_energies[k], b.band_energies[k], t);
    }
    FeatureFrame {
        log_energy: lerp(a.log_energy, b.log_energy, t),
        hf_ratio: lerp(a.hf_ratio, b.hf_ratio, t),
        band_energies,
    }
}

/// Uniform linear-interpolation resampling by factor f = 2^(v * w_speed).
/// A fast segment (v > 0) grows back toward the reference duration. Output
/// frame j reads source position j/f, so integer positions are bit-exact
/// copies; a zero exponent returns the input unchanged.
pub fn normalize_speed(frames: &[FeatureFrame], v: f64, w_speed: f64) -> Vec<FeatureFrame> {
    let exponent = v * w_speed;
    if exponent == 0.0 || frames.is_empty() {
        return frames.to_vec();
    }
    let factor = exponent.exp2();
    let count = frames.len();
    let new_count = ((count as f64 * factor).round() as usize).max(1);
    (0..new_count)
        .map(|j| {
            let p = (j as f64 / factor).min((count - 1) as f64);
            let lo = p.floor() as usize;
            let t = p - lo as f64;
            if t == 0.0 {
                frames[lo]
            } else {
                lerp_frame(&frames[lo], &frames[lo + 1], t)
            }
        })
        .collect()
}

/// Subtract e * w_emph dB from every energy entry. log_energy keeps its
/// extraction-time floor; band energies stay linear in the shift so later
/// tilt arithmetic is exact. hf_ratio is untouched.
pub fn normalize_gain(frames: &[FeatureFrame], e: f64, w_emph: f64) -> Vec<FeatureFrame> {
    let shift = e * w_emph;
    if shift == 0.0 {
        return frames.to_vec();
    }
    frames
        .iter()
        .map(|f| {
            let mut band_energies = [0.0; NUM_BANDS];
            for (k, out) in band_energies.iter_mut().enumerate() {
                *out = f.band_energies[k] - shift;
            }
            FeatureFrame {
                log_energy: (f.log_energy - shift).max(ENERGY_FLOOR_DB),
                hf_ratio: f.hf_ratio,
                band_energies,
            }
        })
        .collect()
}

/// Pooled band-derived HF ratio under a candidate tilt slope (dB across the
/// half band span). Pooling over frames equals the energy-weighted mean of
/// per-frame ratios.
fn band_ratio(frames: &[FeatureFrame], slope_span: f64, hf_band_start: usize) -> f64 {
    let mut hf = 0.0;
    let mut total = 0.0;
    for f in frames {
        for (k, &b) in f.band_energies.iter().enumerate() {
            let shifted = b + slope_span * (k as f64 - 3.5) / 3.5;
            let power = 10f64.powf(shifted / 10.0);
            total += power;
            if k >= hf_band_start {
                hf += power;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        hf / total
    }
}

/// Solve for the tilt slope that moves the band-derived ratio to
/// r' = crisp + (target - crisp) * w_acc, within [`TILT_RATIO_TOLERANCE`].
/// Returns 0.0 whenever no correction is needed or possible.
fn solve_tilt_slope(
    frames: &[FeatureFrame],
    crisp_ratio: f64,
    w_acc: f64,
    params: &FilterParams,
) -> f64 {
    if frames.is_empty() || w_acc == 0.0 {
        return 0.0;
    }
    if params.hf_band_start == 0 || params.hf_band_start >= NUM_BANDS {
        // Every band (or no band) counts as HF; no slope can move the ratio.
        return 0.0;
    }
    if frames
        .iter()
        .all(|f| f.band_energies.iter().all(|&b| b <= ENERGY_FLOOR_DB))
    {
        return 0.0;
    }
    let target = crisp_ratio + (params.tilt_target - crisp_ratio) * w_acc;
    if (band_ratio(frames, 0.0, params.hf_band_start) - target).abs() <= TILT_RATIO_TOLERANCE {
        return 0.0;
    }
    // The ratio is monotone increasing in the slope. Clamp at the limits
    // when the target is out of reach.
    let (mut lo, mut hi) = (-TILT_SLOPE_LIMIT_DB, TILT_SLOPE_LIMIT_DB);
    if band_ratio(frames, lo, params.hf_band_start) >= target {
        return lo;
    }
    if band_ratio(frames, hi, params.hf_band_start) <= target {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = band_ratio(frames, mid, params.hf_band_start);
        if (r - target).abs() <= TILT_RATIO_TOLERANCE * 0.5 {
            return mid;
        }
        if r < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn apply_tilt_slope(
    frames: &[FeatureFrame],
    slope_span: f64,
    hf_band_start: usize,
) -> Vec<FeatureFrame> {
    if slope_span == 0.0 {
        return frames.to_vec();
    }
    frames
        .iter()
        .map(|f| {
            let mut band_energies = [0.0; NUM_BANDS];
            for (k, out) in band_energies.iter_mut().enumerate() {
                *out = f.band_energies[k] + slope_span * (k as f64 - 3.5) / 3.5;
            }
            // hf_ratio is re-derived from the corrected bands.
            let mut hf = 0.0;
            let mut total = 0.0;
            for (k, &b) in band_energies.iter().enumerate() {
                let power = 10f64.powf(b / 10.0);
                total += power;
                if k >= hf_band_start {
                    hf += power;
                }
            }
            FeatureFrame {
                log_energy: f.log_energy,
                hf_ratio: if total == 0.0 { 0.0 } else { hf / total },
                band_energies,
            }
        })
        .collect()
}

/// Linear-in-band-index tilt steering the segment's band-derived HF ratio
/// toward r' = crisp + (target - crisp) * w_acc.
pub fn normalize_tilt(
    frames: &[FeatureFrame],
    crisp_ratio: f64,
    w_acc: f64,
    params: &FilterParams,
) -> Vec<FeatureFrame> {
    let slope = solve_tilt_slope(frames, crisp_ratio, w_acc, params);
    apply_tilt_slope(frames, slope, params.hf_band_start)
}

/// One filter pass over one segment: profile, weights, then speed, gain,
/// and tilt corrections in that order.
pub fn filter_segment(
    seg: &Segment,
    reference_frames: f64,
    utterance_mean_db: f64,
    vars: &VariableSet,
    params: &FilterParams,
) -> Result<(Segment, ParalinguisticProfile, CorrectionSet)> {
    let before = profile_segment(seg, reference_frames, utterance_mean_db, vars)?;
    let weights = correction_weights(&before);

    let after_speed = normalize_speed(&seg.frames, before.speed.crisp, weights.speed);
    let after_gain = normalize_gain(&after_speed, before.emphasis.crisp, weights.emphasis);
    let slope = solve_tilt_slope(&after_gain, before.accent.crisp, weights.accent, params);
    let after_tilt = apply_tilt_slope(&after_gain, slope, params.hf_band_start);

    let corrections = CorrectionSet {
        resample_factor: (before.speed.crisp * weights.speed).exp2(),
        gain_shift_db: before.emphasis.crisp * weights.emphasis,
        tilt_db_per_band: slope / 3.5,
    };
    let filtered = Segment {
        start_frame: seg.start_frame,
        end_frame: seg.end_frame,
        frames: after_tilt,
    };
    Ok((filtered, before, corrections))
}

/// Mean log-energy pooled over every frame of every segment.
pub fn pooled_mean_log_energy(segments: &[Segment]) -> f64 {
    let count: usize = segments.iter().map(|s| s.frames.len()).sum();
    if count == 0 {
        return f64::NAN;
    }
    let sum: f64 = segments
        .iter()
        .flat_map(|s| &s.frames)
        .map(|f| f.log_energy)
        .sum();
    sum / count as f64
}

/// Filter every segment of an utterance against one speed reference.
///
/// The emphasis offset is measured against the pooled mean of all segment
/// frames, so a single-segment utterance is exactly emphasis-neutral: with
/// no sibling segments there is no relative stress to strip. The "after"
/// profiles are measured against the pooled mean of the corrected segments,
/// so re-running the profiler on the output reproduces them.
pub fn filter_utterance(
    segments: &[Segment],
    reference_frames: f64,
    vars: &VariableSet,
    params: &FilterParams,
) -> Result<(Vec<Segment>, Vec<ParalinguisticRecord>)> {
    if segments.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let utterance_mean = pooled_mean_log_energy(segments);

    let mut filtered = Vec::with_capacity(segments.len());
    let mut partial = Vec::with_capacity(segments.len());
    for (id, seg) in segments.iter().enumerate() {
        let (out, before, corrections) =
            filter_segment(seg, reference_frames, utterance_mean, vars, params).map_err(|e| {
                Error::InSegment {
                    segment: id,
                    source: Box::new(e),
                }
            })?;
        filtered.push(out);
        partial.push((id, before, corrections));
    }

    let mean_after = pooled_mean_log_energy(&filtered);
    let mut records = Vec::with_capacity(segments.len());
    for ((id, before, corrections), seg) in partial.into_iter().zip(&filtered) {
        let after = profile_segment(seg, reference_frames, mean_after, vars).map_err(|e| {
            Error::InSegment {
                segment: id,
                source: Box::new(e),
            }
        })?;
        records.push(ParalinguisticRecord {
            segment: id,
            before,
            corrections,
            after,
            reference_frames,
        });
    }
    Ok((filtered, records))
}
