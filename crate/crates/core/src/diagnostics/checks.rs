//! Trace checks, each behind the [`TraceCheck`] trait and looked up by name.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gradient;
use crate::error::{Error, Result};
use crate::linalg::symmetric_part;
use crate::solver::{FactorSet, SolveResult, SweepSnapshot};
use crate::tensor::DenseTensor;

/// Slack on the sufficient-decrease inequality, relative to `‖A‖²`.
pub const DECREASE_SLACK: f64 = 1e-10;
/// Slack on plain monotonicity, relative to `‖A‖²`.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Absolute slack on the subdifferential bound and the normal-space residual.
pub const SUBGRAD_SLACK: f64 = 1e-8;
/// Absolute slack on a truncation's objective jump.
pub const TRUNCATION_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub sweep: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Number of sweeps the inequality was evaluated on.
    pub checked: usize,
    pub violations: Vec<Violation>,
    /// Check-specific summary value (see each check).
    pub metric: Option<f64>,
}

impl CheckReport {
    fn new(name: &str, checked: usize, violations: Vec<Violation>, metric: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            passed: violations.is_empty(),
            checked,
            violations,
            metric,
        }
    }
}

pub struct CheckContext<'a> {
    pub tensor: &'a DenseTensor,
    pub result: &'a SolveResult,
}

pub trait TraceCheck: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, ctx: &CheckContext<'_>) -> Result<CheckReport>;
}

struct SufficientDecrease;
struct Monotone;
struct SubgradientBound;
struct Truncation;
struct Feasibility;

impl TraceCheck for SufficientDecrease {
    fn name(&self) -> &'static str {
        "sufficient_decrease"
    }
    fn run(&self, ctx: &CheckContext<'_>) -> Result<CheckReport> {
        Ok(check_sufficient_decrease(ctx.result, ctx.result.epsilon, ctx.result.kappa))
    }
}

impl TraceCheck for Monotone {
    fn name(&self) -> &'static str {
        "monotone"
    }
    fn run(&self, ctx: &CheckContext<'_>) -> Result<CheckReport> {
        Ok(check_monotone(ctx.result))
    }
}

impl TraceCheck for SubgradientBound {
    fn name(&self) -> &'static str {
        "subgradient_bound"
    }
    fn run(&self, ctx: &CheckContext<'_>) -> Result<CheckReport> {
        check_subgrad_bound(ctx.tensor, ctx.result, ctx.result.epsilon)
    }
}

impl TraceCheck for Truncation {
    fn name(&self) -> &'static str {
        "truncation"
    }
    fn run(&self, ctx: &CheckContext<'_>) -> Result<CheckReport> {
        Ok(check_truncation(ctx.result))
    }
}

impl TraceCheck for Feasibility {
    fn name(&self) -> &'static str {
        "feasibility"
    }
    fn run(&self, ctx: &CheckContext<'_>) -> Result<CheckReport> {
        check_feasibility(ctx.result)
    }
}

/// All registered checks, in report order.
pub fn registry() -> Vec<Box<dyn TraceCheck>> {
    vec![
        Box::new(Monotone),
        Box::new(SufficientDecrease),
        Box::new(SubgradientBound),
        Box::new(Truncation),
        Box::new(Feasibility),
    ]
}

pub(super) fn select(names: &[String]) -> Result<Vec<Box<dyn TraceCheck>>> {
    let all = registry();
    if names.is_empty() {
        return Ok(all);
    }
    let available = all.iter().map(|c| c.name()).collect::<Vec<_>>().join(", ");
    let mut pool: Vec<Option<Box<dyn TraceCheck>>> = all.into_iter().map(Some).collect();
    names
        .iter()
        .map(|n| {
            pool.iter_mut()
                .find(|c| c.as_ref().is_some_and(|c| c.name() == n))
                .and_then(Option::take)
                .ok_or_else(|| Error::UnknownStrategy {
                    kind: "check",
                    name: n.clone(),
                    available: available.clone(),
                })
        })
        .collect()
}

/// Sweeps covered by the decrease-type inequalities: after stabilization, no
/// truncation, no re-drawn column.
fn eligible(result: &SolveResult) -> impl Iterator<Item = usize> + '_ {
    (1..result.trace.len()).filter(move |&p| {
        let r = &result.trace[p];
        r.sweep > result.stabilization_sweep && !r.is_truncation() && !r.zero_contraction
    })
}

/// `g_{p−1} − g_p + 1e-10‖A‖² ≥ (min{ε, 2κ²}/2)‖U_[p−1] − U_[p]‖²`.
///
/// `metric` is the smallest observed `(g_{p−1} − g_p)/‖(U,λ)_[p−1] − (U,λ)_[p]‖²`,
/// an empirical stand-in for the joint constant.
pub fn check_sufficient_decrease(result: &SolveResult, epsilon: f64, kappa: f64) -> CheckReport {
    let c = epsilon.min(2.0 * kappa * kappa) / 2.0;
    let slack = DECREASE_SLACK * result.a_norm_sq;
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut joint_ratio = f64::INFINITY;
    for p in eligible(result) {
        checked += 1;
        let (prev, cur) = (&result.trace[p - 1], &result.trace[p]);
        let decrease = prev.objective - cur.objective;
        let lhs = decrease + slack;
        let rhs = c * cur.step_norm * cur.step_norm;
        if lhs < rhs {
            violations.push(Violation {
                sweep: cur.sweep,
                lhs,
                rhs,
                detail: format!("decrease {decrease:e} below {c:e}·step²"),
            });
        }
        if cur.joint_step_norm > 0.0 {
            joint_ratio = joint_ratio.min(decrease / (cur.joint_step_norm * cur.joint_step_norm));
        }
    }
    CheckReport::new(
        "sufficient_decrease",
        checked,
        violations,
        joint_ratio.is_finite().then_some(joint_ratio),
    )
}

/// `g_{p−1} − g_p ≥ −1e-12‖A‖²` after stabilization.
pub fn check_monotone(result: &SolveResult) -> CheckReport {
    let slack = MONOTONE_SLACK * result.a_norm_sq;
    let mut violations = Vec::new();
    let mut checked = 0;
    for p in eligible(result) {
        checked += 1;
        let lhs = result.trace[p - 1].objective - result.trace[p].objective;
        if lhs < -slack {
            violations.push(Violation {
                sweep: p,
                lhs,
                rhs: -slack,
                detail: "objective increased".into(),
            });
        }
    }
    CheckReport::new("monotone", checked, violations, None)
}

/// Truncation bookkeeping: no removal after the stabilization sweep, rank
/// never grows, at most `r` removals in total, and each removal raises the
/// objective by at most `κ²`.
///
/// `metric` is the largest per-component jump divided by `κ²`.
pub fn check_truncation(result: &SolveResult) -> CheckReport {
    let kappa_sq = result.kappa * result.kappa;
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for w in result.trace.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        checked += 1;
        if cur.rank > prev.rank {
            violations.push(Violation {
                sweep: cur.sweep,
                lhs: cur.rank as f64,
                rhs: prev.rank as f64,
                detail: "rank increased".into(),
            });
        }
        if cur.is_truncation() {
            if cur.sweep > result.stabilization_sweep {
                violations.push(Violation {
                    sweep: cur.sweep,
                    lhs: cur.sweep as f64,
                    rhs: result.stabilization_sweep as f64,
                    detail: "truncation after stabilization".into(),
                });
            }
            let allowed = cur.truncated.len() as f64 * kappa_sq + TRUNCATION_SLACK;
            if cur.truncation_jump > allowed {
                violations.push(Violation {
                    sweep: cur.sweep,
                    lhs: cur.truncation_jump,
                    rhs: allowed,
                    detail: "truncation raised the objective by more than κ² per component".into(),
                });
            }
            if kappa_sq > 0.0 {
                worst = worst.max(cur.truncation_jump / (cur.truncated.len() as f64 * kappa_sq));
            }
        }
    }
    let total = result.total_truncated();
    if total > result.initial_rank {
        violations.push(Violation {
            sweep: result.trace.len() - 1,
            lhs: total as f64,
            rhs: result.initial_rank as f64,
            detail: "more truncations than initial rank".into(),
        });
    }
    CheckReport::new("truncation", checked, violations, Some(worst))
}

fn snapshots_required(result: &SolveResult, check: &str) -> Result<()> {
    if result.snapshots.len() != result.trace.len() {
        return Err(Error::Input(format!(
            "{check} needs per-sweep snapshots ({} snapshots for {} trace rows)",
            result.snapshots.len(),
            result.trace.len()
        )));
    }
    Ok(())
}

/// Every stored iterate lies on the constraint manifold to tolerance.
pub fn check_feasibility(result: &SolveResult) -> Result<CheckReport> {
    snapshots_required(result, "feasibility")?;
    let mut violations = Vec::new();
    for snap in &result.snapshots {
        let u = FactorSet::try_from(&snap.state)?;
        let (stiefel, sphere) = u.feasibility_defect();
        if stiefel > 1e-8 || sphere > 1e-10 {
            violations.push(Violation {
                sweep: snap.sweep,
                lhs: stiefel.max(sphere),
                rhs: if stiefel > 1e-8 { 1e-8 } else { 1e-10 },
                detail: format!("stiefel defect {stiefel:e}, sphere defect {sphere:e}"),
            });
        }
    }
    Ok(CheckReport::new("feasibility", result.snapshots.len(), violations, None))
}

fn columns_to_matrix(cols: &[Vec<f64>], rows: usize) -> DMatrix<f64> {
    let flat: Vec<f64> = cols.iter().flatten().copied().collect();
    DMatrix::from_vec(rows, cols.len(), flat)
}

/// Outcome of the subdifferential construction at one sweep.
#[derive(Debug, Clone, Copy)]
pub struct SubgradSample {
    /// Distance of `W` from the normal space, summed over blocks.
    pub normal_residual: f64,
    /// `‖dψ*(ψ − A) − (W, 0)‖_F`.
    pub lhs: f64,
    /// `2√k(2r√k‖A‖² + ε)·‖U_[p+1] − U_[p]‖_F`.
    pub bound: f64,
}

/// Build `W_[p+1]` from the stored mode data of sweep `cur` and compare it
/// with the gradient at the new iterate.
pub fn subgrad_sample(
    a: &DenseTensor,
    prev: &SweepSnapshot,
    cur: &SweepSnapshot,
    epsilon: f64,
) -> Result<SubgradSample> {
    let u_old = FactorSet::try_from(&prev.state)?;
    let u_new = FactorSet::try_from(&cur.state)?;
    let k = u_new.order();
    let s = u_new.orth_modes;
    let r = u_new.rank();
    let grad = gradient(a, &u_new)?;
    let lam_sq = DVector::from_fn(r, |j, _| u_new.lambda[j] * u_new.lambda[j]);

    let mut normal_sq = 0.0;
    let mut diff_sq = grad.lambda.norm_squared();
    for i in 0..k {
        let mode = &cur.modes[i];
        let ui = &u_new.factors[i];
        let n = ui.nrows();
        let vi = columns_to_matrix(&mode.v, n);
        let coeff = if i < s { &mode.lambda_in } else { &mode.lambda_out };
        let mut w = DMatrix::from_fn(n, r, |row, j| ui[(row, j)] * lam_sq[j] - vi[(row, j)] * coeff[j]);
        if i < s {
            w -= (&u_old.factors[i] - ui) * mode.alpha;
            let normal = ui * symmetric_part(&(ui.transpose() * &w));
            normal_sq += (&w - normal).norm_squared();
        } else {
            for j in 0..r {
                let uj = ui.column(j);
                let wj = w.column(j);
                normal_sq += (wj - uj * uj.dot(&wj)).norm_squared();
            }
        }
        diff_sq += (&grad.factors[i] - w).norm_squared();
    }

    let kf = k as f64;
    let step = u_new.factor_distance_sq(&u_old).sqrt();
    let bound = 2.0 * kf.sqrt() * (2.0 * r as f64 * kf.sqrt() * a.frobenius_sq() + epsilon) * step;
    Ok(SubgradSample {
        normal_residual: normal_sq.sqrt(),
        lhs: diff_sq.sqrt(),
        bound,
    })
}

/// On every non-truncation sweep: `W_[p+1]` lies in the normal space (to
/// 1e-8) and `‖dψ*(ψ − A) − (W, 0)‖ ≤ 2√k(2r√k‖A‖² + ε)‖ΔU‖ + 1e-8`.
///
/// `metric` is the largest observed `lhs / bound` ratio.
pub fn check_subgrad_bound(a: &DenseTensor, result: &SolveResult, epsilon: f64) -> Result<CheckReport> {
    snapshots_required(result, "subgradient_bound")?;
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut worst = 0.0f64;
    for p in 1..result.trace.len() {
        let rec = &result.trace[p];
        if rec.is_truncation() || rec.zero_contraction {
            continue;
        }
        checked += 1;
        let sample = subgrad_sample(a, &result.snapshots[p - 1], &result.snapshots[p], epsilon)?;
        if sample.normal_residual > SUBGRAD_SLACK {
            violations.push(Violation {
                sweep: rec.sweep,
                lhs: sample.normal_residual,
                rhs: SUBGRAD_SLACK,
                detail: "W outside the normal space".into(),
            });
        }
        if sample.lhs > sample.bound + SUBGRAD_SLACK {
            violations.push(Violation {
                sweep: rec.sweep,
                lhs: sample.lhs,
                rhs: sample.bound + SUBGRAD_SLACK,
                detail: "subdifferential bound exceeded".into(),
            });
        }
        if sample.bound > 0.0 {
            worst = worst.max(sample.lhs / sample.bound);
        }
    }
    Ok(CheckReport::new("subgradient_bound", checked, violations, Some(worst)))
}
