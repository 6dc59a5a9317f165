//! Smoothing-parameter selection by minimizing GCV over `log λ`.

use serde::{Deserialize, Serialize};

use crate::error::GamError;
use crate::pls::PenalizedLs;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    /// Natural-log bounds of the search interval.
    pub log_lower: f64,
    pub log_upper: f64,
    /// Stop cycling when the relative GCV change over a full cycle drops
    /// below this.
    pub rel_tol: f64,
    pub max_cycles: usize,
    /// Width of the final golden-section bracket in `log λ`.
    pub log_tol: f64,
    /// Points in the coarse scan that brackets each golden-section search.
    pub scan_points: usize,
}

impl Default for LambdaSearch {
    fn default() -> Self {
        LambdaSearch {
            log_lower: -8.0,
            log_upper: 12.0,
            rel_tol: 1e-7,
            max_cycles: 50,
            log_tol: 1e-4,
            scan_points: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaOptimum {
    pub log_lambda: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gcv: f64,
    pub cycles: usize,
    /// False when `max_cycles` was hit before the GCV change settled; the
    /// best point found is still returned.
    pub converged: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizes GCV by cyclic coordinate search over `log λ`. Each coordinate
/// step scans a coarse grid to bracket the minimum, then refines it with
/// golden-section search.
pub fn optimize_lambda(
    problem: &PenalizedLs,
    search: &LambdaSearch,
) -> Result<LambdaOptimum, GamError> {
    let k = problem.penalties().len();
    if k == 0 {
        let gcv = problem.gcv(&[])?;
        return Ok(LambdaOptimum {
            log_lambda: vec![],
            lambda: vec![],
            gcv,
            cycles: 0,
            converged: true,
        });
    }
    let mut rho = vec![0.0f64.clamp(search.log_lower, search.log_upper); k];
    let eval = |rho: &[f64]| -> Result<f64, GamError> {
        let lambda: Vec<f64> = rho.iter().map(|r| r.exp()).collect();
        problem.gcv(&lambda)
    };
    let mut best = eval(&rho)?;
    let mut converged = false;
    let mut cycles = 0;
    while cycles < search.max_cycles {
        cycles += 1;
        let start = best;
        for j in 0..k {
            let (r, g) = coordinate_min(search, |value| {
                let mut trial = rho.clone();
                trial[j] = value;
                eval(&trial)
            })?;
            if g < best {
                best = g;
                rho[j] = r;
            }
        }
        let change = if start.is_finite() && start != 0.0 {
            (start - best).abs() / start.abs()
        } else if start == best {
            0.0
        } else {
            f64::INFINITY
        };
        if change < search.rel_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("GCV search stopped after {cycles} cycles without settling");
    }
    Ok(LambdaOptimum {
        lambda: rho.iter().map(|r| r.exp()).collect(),
        log_lambda: rho,
        gcv: best,
        cycles,
        converged,
    })
}

fn coordinate_min<F>(search: &LambdaSearch, mut f: F) -> Result<(f64, f64), GamError>
where
    F: FnMut(f64) -> Result<f64, GamError>,
{
    let m = search.scan_points.max(3);
    let (lo, hi) = (search.log_lower, search.log_upper);
    let step = (hi - lo) / (m - 1) as f64;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..m {
        let v = f(lo + step * i as f64)?;
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = lo + step * best_i.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);
    let mut best_x = lo + step * best_i as f64;

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a) > search.log_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best_v {
            best_v = v;
            best_x = x;
        }
    }
    Ok((best_x, best_v))
}
