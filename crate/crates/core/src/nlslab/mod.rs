//! Small closed-form least-squares problems, multi-start Newton search for
//! their critical points, and the genericity experiment built on top.

mod problems;

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use problems::{Hyperboloid, Lu, NlsProblem};

use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Reported critical points satisfy `‖∇f‖ ≤ GRAD_TOL`.
pub const GRAD_TOL: f64 = 1e-9;
/// Reported points keep `|x_0| > DOMAIN_TOL`.
pub const DOMAIN_TOL: f64 = 1e-8;
/// Points closer than this are merged.
pub const DEDUP_TOL: f64 = 1e-6;
/// A target violates the genericity prediction when some found point has
/// datum at most this.
pub const VIOLATION_TOL: f64 = 1e-6;
/// Half-width of the start box before scaling by `1 + ‖b‖`.
pub const START_BOX: f64 = 3.0;

/// Largest Newton step, relative to `1 + ‖x‖`, accepted at a reported point.
pub const STEP_TOL: f64 = 1e-6;

const MAX_NEWTON_STEPS: usize = 200;
const STALL_TOL: f64 = 1e-14;
const MAX_HALVINGS: usize = 50;

pub fn registry() -> Vec<Box<dyn NlsProblem>> {
    vec![Box::new(Hyperboloid), Box::new(Lu)]
}

pub fn by_name(name: &str) -> Result<Box<dyn NlsProblem>> {
    let all = registry();
    let available = all.iter().map(|p| p.name()).collect::<Vec<_>>().join(", ");
    all.into_iter()
        .find(|p| p.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "problem",
            name: name.to_string(),
            available,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub coords: Vec<f64>,
    pub gradient_norm: f64,
    /// `|s − t|` or `|xw − yz|`.
    pub datum: f64,
}

/// `∇f = Jᵀ(ψ(x) − b)`.
pub fn gradient(p: &dyn NlsProblem, b: &[f64], x: &[f64]) -> DVector<f64> {
    let r = residual(p, b, x);
    p.jacobian(x).tr_mul(&r)
}

fn residual(p: &dyn NlsProblem, b: &[f64], x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(b.len(), p.psi(x).iter().zip(b).map(|(y, bi)| y - bi))
}

fn in_domain(x: &DVector<f64>, sign: f64) -> bool {
    x.iter().all(|v| v.is_finite()) && x[0] * sign > DOMAIN_TOL
}

/// Solution of `H d = −∇f` with `H = JᵀJ + Σ_k r_k ∇²ψ_k`.
fn newton_step(p: &dyn NlsProblem, b: &[f64], x: &DVector<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let r = residual(p, b, x.as_slice());
    let j = p.jacobian(x.as_slice());
    let mut h = j.tr_mul(&j);
    for (rk, hk) in r.iter().zip(p.component_hessians(x.as_slice())) {
        h += hk * *rk;
    }
    h.lu().solve(&(-g)).filter(|d| d.iter().all(|v| v.is_finite()))
}

/// Damped Newton on `∇f = 0` from `x0`, run until `‖∇f‖` stops decreasing.
///
/// Returns a point only if it ends with `‖∇f‖ ≤ GRAD_TOL` and a Newton step
/// below `STEP_TOL·(1 + ‖x‖)`, inside the half-space of `x0`'s first
/// coordinate. The step test rejects iterates pinned against the domain
/// guard, where `∇f` is small only because `ψ` flattens out.
pub fn newton(p: &dyn NlsProblem, b: &[f64], x0: &[f64]) -> Option<CriticalPoint> {
    let sign = x0[0].signum();
    let mut x = DVector::from_column_slice(x0);
    if !in_domain(&x, sign) {
        return None;
    }
    let mut g = gradient(p, b, x.as_slice());
    let mut gn = g.norm();
    for _ in 0..MAX_NEWTON_STEPS {
        if gn == 0.0 {
            break;
        }
        let dirs = newton_step(p, b, &x, &g).into_iter().chain(std::iter::once(-&g));
        let mut step = None;
        for d in dirs {
            let mut t = 1.0;
            for _ in 0..MAX_HALVINGS {
                let trial = &x + &d * t;
                if in_domain(&trial, sign) {
                    let gt = gradient(p, b, trial.as_slice());
                    let gtn = gt.norm();
                    if gtn < gn {
                        step = Some((d.norm() * t, trial, gt, gtn));
                        break;
                    }
                }
                t *= 0.5;
            }
            if step.is_some() {
                break;
            }
        }
        let Some((len, trial, gt, gtn)) = step else {
            break;
        };
        x = trial;
        g = gt;
        gn = gtn;
        if gn > GRAD_TOL && len <= STALL_TOL * (1.0 + x.norm()) {
            break;
        }
    }
    if gn > GRAD_TOL {
        return None;
    }
    let d = newton_step(p, b, &x, &g)?;
    (d.norm() <= STEP_TOL * (1.0 + x.norm())).then(|| CriticalPoint {
        datum: p.datum(x.as_slice()),
        coords: x.iter().copied().collect(),
        gradient_norm: gn,
    })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Sort lexicographically and drop every point within `DEDUP_TOL` of an
/// earlier kept point.
pub fn dedup(mut points: Vec<CriticalPoint>) -> Vec<CriticalPoint> {
    points.sort_by(|a, b| lex_cmp(&a.coords, &b.coords));
    let mut kept: Vec<CriticalPoint> = Vec::new();
    for pt in points {
        let close = kept.iter().any(|k| {
            k.coords
                .iter()
                .zip(&pt.coords)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                <= DEDUP_TOL
        });
        if !close {
            kept.push(pt);
        }
    }
    kept
}

/// Uniform starts in `[−3, 3]^d · (1 + ‖b‖)`.
pub fn draw_starts<R: Rng + ?Sized>(dim: usize, b: &[f64], starts: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let half = START_BOX * (1.0 + b.iter().map(|v| v * v).sum::<f64>().sqrt());
    (0..starts)
        .map(|_| (0..dim).map(|_| rng.random_range(-half..half)).collect())
        .collect()
}

/// Deduplicated critical points reached from the given starts.
pub fn critical_points_from(p: &dyn NlsProblem, b: &[f64], starts: &[Vec<f64>]) -> Result<Vec<CriticalPoint>> {
    if b.len() != p.target_dim() {
        return Err(Error::Input(format!(
            "{} target needs {} entries, got {}",
            p.name(),
            p.target_dim(),
            b.len()
        )));
    }
    if let Some(s) = starts.iter().find(|s| s.len() != p.dim()) {
        return Err(Error::Input(format!("{} start needs {} entries, got {}", p.name(), p.dim(), s.len())));
    }
    let found: Vec<CriticalPoint> = starts.par_iter().filter_map(|x0| newton(p, b, x0)).collect();
    Ok(dedup(found))
}

/// Multi-start search with `starts` random starts.
pub fn find_criticals<R: Rng + ?Sized>(
    p: &dyn NlsProblem,
    b: &[f64],
    starts: usize,
    rng: &mut R,
) -> Result<Vec<CriticalPoint>> {
    if starts == 0 {
        return Err(Error::Config("starts must be at least 1".into()));
    }
    let x0 = draw_starts(p.dim(), b, starts, rng);
    critical_points_from(p, b, &x0)
}

pub fn hyperboloid_criticals<R: Rng + ?Sized>(b: &[f64], starts: usize, rng: &mut R) -> Result<Vec<CriticalPoint>> {
    find_criticals(&Hyperboloid, b, starts, rng)
}

pub fn lu_criticals<R: Rng + ?Sized>(b: &[f64], starts: usize, rng: &mut R) -> Result<Vec<CriticalPoint>> {
    find_criticals(&Lu, b, starts, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub index: usize,
    pub b: Vec<f64>,
    pub found: usize,
    /// Smallest datum over the found points.
    pub min_datum: Option<f64>,
    pub violates: bool,
    pub points: Vec<CriticalPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationSummary {
    pub kind: String,
    pub seed: u64,
    pub starts: usize,
    pub num_b: usize,
    pub violations: usize,
    pub targets_without_points: usize,
    pub targets: Vec<TargetSummary>,
}

impl LocationSummary {
    /// Histogram of `log10(min_datum)` over targets, one row per decade.
    pub fn histogram_csv(&self) -> String {
        let mut counts = std::collections::BTreeMap::<i32, usize>::new();
        for m in self.targets.iter().filter_map(|t| t.min_datum) {
            let decade = if m > 0.0 { m.log10().floor() as i32 } else { i32::MIN };
            *counts.entry(decade).or_default() += 1;
        }
        let mut out = String::from("log10_lo,log10_hi,count\n");
        for (d, c) in counts {
            if d == i32::MIN {
                let _ = writeln!(out, "-inf,-inf,{c}");
            } else {
                let _ = writeln!(out, "{},{},{c}", d, d + 1);
            }
        }
        out
    }
}

fn summarize(index: usize, b: Vec<f64>, points: Vec<CriticalPoint>) -> TargetSummary {
    let min_datum = points.iter().map(|c| c.datum).min_by(f64::total_cmp);
    TargetSummary {
        index,
        found: points.len(),
        violates: min_datum.is_some_and(|m| m <= VIOLATION_TOL),
        min_datum,
        b,
        points,
    }
}

/// Run the search on explicit targets; target `i` draws its starts from
/// substream `i` of the location stream.
pub fn location_experiment_on(
    kind: &str,
    targets: &[Vec<f64>],
    starts: usize,
    seed: u64,
) -> Result<LocationSummary> {
    let p = by_name(kind)?;
    if starts == 0 {
        return Err(Error::Config("starts must be at least 1".into()));
    }
    let summaries = targets
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let mut rng = rng::substream(seed, streams::LOCATION, i as u64);
            let pts = find_criticals(p.as_ref(), b, starts, &mut rng)?;
            Ok(summarize(i, b.clone(), pts))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocationSummary {
        kind: p.name().to_string(),
        seed,
        starts,
        num_b: targets.len(),
        violations: summaries.iter().filter(|t| t.violates).count(),
        targets_without_points: summaries.iter().filter(|t| t.found == 0).count(),
        targets: summaries,
    })
}

/// Standard Gaussian targets, target `i` from substream `i` of the location
/// stream (the same generator then supplies its starts).
pub fn location_experiment(kind: &str, num_b: usize, starts: usize, seed: u64) -> Result<LocationSummary> {
    if num_b == 0 {
        return Err(Error::Config("num_b must be at least 1".into()));
    }
    let p = by_name(kind)?;
    let targets: Vec<Vec<f64>> = (0..num_b)
        .map(|i| {
            // offset keeps target draws apart from the start draws
            let mut rng = rng::substream(seed, streams::LOCATION, (num_b + i) as u64);
            rng::gaussian_vec(&mut rng, p.target_dim())
        })
        .collect();
    location_experiment_on(kind, &targets, starts, seed)
}
