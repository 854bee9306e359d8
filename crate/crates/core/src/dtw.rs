//! Dynamic-time-warping alignment: cost matrix, symmetric step pattern
//! {(1,0),(0,1),(1,1)}, slanted band constraint, path recovery, and a
//! brute-force path-enumeration oracle for testing.
//!
//! Both `dtw` and the oracle accumulate a path's cost as `running + cell`,
//! one addition per cell in path order. IEEE addition is commutative, so an
//! optimal path evaluates to bit-identical totals in both implementations.

use serde::{Deserialize, Serialize};

use crate::audio::{FeatureFrame, NUM_BANDS};
use crate::error::{Error, Result};

/// Cell budget for the exhaustive oracle.
pub const BRUTE_FORCE_CELL_LIMIT: usize = 64;

/// Sakoe-Chiba style corridor around the slanted diagonal
/// `center_j(i) = i*(m-1)/(n-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandConstraint {
    Unbounded,
    HalfWidth(usize),
}

impl BandConstraint {
    /// Default policy: no band for short sequences, a 10% corridor for
    /// long ones.
    pub fn auto_for(n: usize, m: usize) -> Self {
        let longest = n.max(m);
        if longest <= 200 {
            BandConstraint::Unbounded
        } else {
            BandConstraint::HalfWidth(longest / 10)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub total_cost: f64,
    /// Monotone cell sequence from (0,0) to (n-1,m-1).
    pub path: Vec<(usize, usize)>,
    /// `total_cost` divided by the realized path length.
    pub normalized_cost: f64,
    /// Corridor half-width actually used; `None` when unbounded.
    pub effective_half_width: Option<usize>,
    /// True when the requested half-width was below `ceil(|n-m|/2)` and had
    /// to be widened for the end cells to stay reachable.
    pub band_widened: bool,
}

/// Local distance between frames: Euclidean over the 10-entry vector
/// (log_energy/20, hf_ratio, band_energies/20), so a 0.3 ratio difference
/// and a 6 dB energy difference carry comparable weight.
pub fn local_cost(f1: &FeatureFrame, f2: &FeatureFrame) -> f64 {
    let mut sum = 0.0;
    let d = (f1.log_energy - f2.log_energy) / 20.0;
    sum += d * d;
    let d = f1.hf_ratio - f2.hf_ratio;
    sum += d * d;
    for k in 0..NUM_BANDS {
        let d = (f1.band_energies[k] - f2.band_energies[k]) / 20.0;
        sum += d * d;
    }
    sum.sqrt()
}

/// Per-row corridor `lo..=hi` of allowed columns.
fn band_rows(
    n: usize,
    m: usize,
    band: BandConstraint,
) -> (Vec<(usize, usize)>, Option<usize>, bool) {
    match band {
        BandConstraint::Unbounded => (vec![(0, m - 1); n], None, false),
        BandConstraint::HalfWidth(requested) => {
            let needed = n.abs_diff(m).div_ceil(2);
            let effective = requested.max(needed);
            let widened = effective > requested;
            if n == 1 || m == 1 {
                // The path is forced through the single row or column.
                return (vec![(0, m - 1); n], Some(effective), widened);
            }
            let slope = (m - 1) as f64 / (n - 1) as f64;
            let h = effective as f64;
            let rows = (0..n)
                .map(|i| {
                    let center = i as f64 * slope;
                    let lo = (center - h).ceil().max(0.0) as usize;
                    let hi = ((center + h).floor() as usize).min(m - 1);
                    (lo, hi)
                })
                .collect();
            (rows, Some(effective), widened)
        }
    }
}

/// Alignment by dynamic programming: `D(i,j) = min(diag, up, left) + c(i,j)`
/// with ties broken preferring the diagonal, then (i-1,j), then (i,j-1).
pub fn dtw_with<T>(
    a: &[T],
    b: &[T],
    band: BandConstraint,
    cost: impl Fn(&T, &T) -> f64,
) -> Result<AlignmentResult> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptyInput);
    }
    let (rows, effective_half_width, band_widened) = band_rows(n, m, band);

    const NONE: u8 = 0;
    const DIAG: u8 = 1;
    const UP: u8 = 2;
    const LEFT: u8 = 3;
    let mut acc = vec![f64::INFINITY; n * m];
    let mut back = vec![NONE; n * m];
    for i in 0..n {
        let (lo, hi) = rows[i];
        for j in lo..=hi {
            let c = cost(&a[i], &b[j]);
            if i == 0 && j == 0 {
                acc[0] = c;
                continue;
            }
            // Strict `<` keeps the earlier candidate on ties, fixing the
            // preference order diagonal, then (i-1,j), then (i,j-1).
            let mut best = f64::INFINITY;
            let mut dir = NONE;
            if i > 0 && j > 0 && acc[(i - 1) * m + (j - 1)] < best {
                best = acc[(i - 1) * m + (j - 1)];
                dir = DIAG;
            }
            if i > 0 && acc[(i - 1) * m + j] < best {
                best = acc[(i - 1) * m + j];
                dir = UP;
            }
            if j > 0 && acc[i * m + (j - 1)] < best {
                best = acc[i * m + (j - 1)];
                dir = LEFT;
            }
            if dir != NONE {
                acc[i * m + j] = best + c;
                back[i * m + j] = dir;
            }
        }
    }

    let total_cost = acc[n * m - 1];
    debug_assert!(total_cost.is_finite(), "band left the end cell unreachable");

    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        path.push((i, j));
        match back[i * m + j] {
            DIAG => {
                i -= 1;
                j -= 1;
            }
            UP => i -= 1,
            LEFT => j -= 1,
            _ => break,
        }
    }
    path.reverse();
    debug_assert!(path_is_valid(&path, n, m), "backtrace produced a bad path");

    let normalized_cost = total_cost / path.len() as f64;
    Ok(AlignmentResult {
        total_cost,
        path,
        normalized_cost,
        effective_half_width,
        band_widened,
    })
}

/// Monotone, connected, correct endpoints.
pub fn path_is_valid(path: &[(usize, usize)], n: usize, m: usize) -> bool {
    if path.first() != Some(&(0, 0)) || path.last() != Some(&(n - 1, m - 1)) {
        return false;
    }
    path.windows(2).all(|w| {
        let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
    })
}

pub fn dtw_frames(
    a: &[FeatureFrame],
    b: &[FeatureFrame],
    band: BandConstraint,
) -> Result<AlignmentResult> {
    dtw_with(a, b, band, local_cost)
}

/// Path-length-normalized alignment distance.
pub fn dtw_distance(a: &[FeatureFrame], b: &[FeatureFrame], band: BandConstraint) -> Result<f64> {
    Ok(dtw_frames(a, b, band)?.normalized_cost)
}

/// Exhaustive minimum over every monotone path. Test oracle; refuses
/// grids larger than [`BRUTE_FORCE_CELL_LIMIT`] cells.
pub fn brute_force_dtw<T>(
    a: &[T],
    b: &[T],
    cost: impl Fn(&T, &T) -> f64,
) -> Result<AlignmentResult> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptyInput);
    }
    if n * m > BRUTE_FORCE_CELL_LIMIT {
        return Err(Error::BruteForceTooLarge {
            limit: BRUTE_FORCE_CELL_LIMIT,
            got: n * m,
        });
    }

    struct Search<'s, T, F> {
        a: &'s [T],
        b: &'s [T],
        cost: F,
        n: usize,
        m: usize,
        best_cost: f64,
        best_path: Vec<(usize, usize)>,
        current: Vec<(usize, usize)>,
    }

    impl<T, F: Fn(&T, &T) -> f64> Search<'_, T, F> {
        fn visit(&mut self, i: usize, j: usize, running: f64) {
            let acc = running + (self.cost)(&self.a[i], &self.b[j]);
            self.current.push((i, j));
            if i == self.n - 1 && j == self.m - 1 {
                if acc < self.best_cost {
                    self.best_cost = acc;
                    self.best_path = self.current.clone();
                }
            } else {
                if i + 1 < self.n && j + 1 < self.m {
                    self.visit(i + 1, j + 1, acc);
                }
                if i + 1 < self.n {
                    self.visit(i + 1, j, acc);
                }
                if j + 1 < self.m {
                    self.visit(i, j + 1, acc);
                }
            }
            self.current.pop();
        }
    }

    let mut search = Search {
        a,
        b,
        cost,
        n,
        m,
        best_cost: f64::INFINITY,
        best_path: Vec::new(),
        current: Vec::new(),
    };
    search.visit(0, 0, 0.0);

    let normalized_cost = search.best_cost / search.best_path.len() as f64;
    Ok(AlignmentResult {
        total_cost: search.best_cost,
        path: search.best_path,
        normalized_cost,
        effective_half_width: None,
        band_widened: false,
    })
}

/// Text dump of the local-cost matrix, one row of `a` per line.
pub fn cost_matrix_text<T>(a: &[T], b: &[T], cost: impl Fn(&T, &T) -> f64) -> String {
    let mut out = String::new();
    for ai in a {
        let row: Vec<String> = b.iter().map(|bj| format!("{:8.4}", cost(ai, bj))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
