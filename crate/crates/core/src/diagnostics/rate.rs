//! Convergence-rate estimation from an objective trace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::SolveResult;

pub const MIN_WINDOW_POINTS: usize = 10;
/// Tail ratio above which a trace is reported as sublinear.
pub const SUBLINEAR_Q: f64 = 0.999;
/// Log-linear fit quality below which a trace is reported as sublinear.
pub const SUBLINEAR_R2: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `(g_p − g_*)/(g_{p−1} − g_*)` for consecutive window points.
    pub q_ratios: Vec<f64>,
    /// Median over the last half of `q_ratios`.
    pub q_tail_median: f64,
    /// `exp(slope)` of the least-squares line through `log(g_p − g_*)`.
    pub r_linear_rho: f64,
    pub r_squared: f64,
    /// First and last sweep index inside the window.
    pub window: (usize, usize),
    pub points: usize,
    pub g_star: f64,
    pub sublinear: bool,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fit on `objectives[p]` for sweep `offset + p`.
///
/// `g_*` is the trace minimum. The window keeps the sweeps with
/// `g_p − g_*` in `(1e3·eps·‖A‖², 1e-2·(g_first − g_*))`.
pub fn rate_fit(objectives: &[f64], offset: usize, a_norm_sq: f64) -> Result<RateFit> {
    let too_short = |points| Error::WindowTooShort {
        points,
        needed: MIN_WINDOW_POINTS,
    };
    let first = *objectives.first().ok_or_else(|| too_short(0))?;
    let g_star = objectives.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = 1e3 * f64::EPSILON * a_norm_sq;
    let ceiling = 1e-2 * (first - g_star);

    let usable: Vec<(usize, f64)> = objectives
        .iter()
        .enumerate()
        .map(|(p, &g)| (p, g - g_star))
        .filter(|&(_, e)| e > floor && e < ceiling)
        .collect();
    if usable.len() < MIN_WINDOW_POINTS {
        return Err(too_short(usable.len()));
    }

    let q_ratios: Vec<f64> = usable
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 + 1)
        .map(|w| w[1].1 / w[0].1)
        .collect();
    if q_ratios.is_empty() {
        return Err(too_short(usable.len()));
    }
    let q_tail_median = median(&q_ratios[q_ratios.len() / 2..]);

    let n = usable.len() as f64;
    let xs: Vec<f64> = usable.iter().map(|&(p, _)| p as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|&(_, e)| e.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };

    Ok(RateFit {
        q_tail_median,
        r_linear_rho: slope.exp(),
        r_squared,
        window: (offset + usable[0].0, offset + usable[usable.len() - 1].0),
        points: usable.len(),
        g_star,
        sublinear: q_tail_median > SUBLINEAR_Q || r_squared < SUBLINEAR_R2,
        q_ratios,
    })
}

/// Rate fit over the sweeps from the stabilization sweep onward.
pub fn rate_fit_result(result: &SolveResult) -> Result<RateFit> {
    let start = result.stabilization_sweep;
    let objectives: Vec<f64> = result.trace[start..].iter().map(|r| r.objective).collect();
    rate_fit(&objectives, start, result.a_norm_sq)
}
