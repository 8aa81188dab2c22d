//! Alternating polar decomposition / alternating least squares with proximal
//! correction and truncation for partially orthogonal low-rank approximation.
//!
//! One sweep visits the modes in order. Orthonormal modes are replaced by the
//! polar factor of `V Λ` (or of `V Λ + ε U_prev` when the smallest singular
//! value drops below `ε`). Right after the last orthonormal mode, components
//! whose coefficient fell below `κ` in magnitude are removed. The remaining
//! modes take normalized least-squares updates, and λ is refreshed at the end.

mod factors;
mod trace;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use factors::{objective, optimal_lambda, FactorSet, FactorSetData};
pub use trace::{write_trace_csv, ModeWork, SweepRecord, SweepSnapshot};

use crate::diagnostics;
use crate::error::{dim_err, Error, Result};
use crate::linalg;
use crate::rng::{self, streams};
use crate::tensor::{col, DenseTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Proximal parameter; `None` means `1e-3·‖A‖`.
    pub epsilon: Option<f64>,
    /// Truncation threshold; `None` picks the midpoint-style default from the
    /// initial point.
    pub kappa: Option<f64>,
    pub max_sweeps: usize,
    pub tol_step: f64,
    pub tol_kkt: f64,
    pub seed: u64,
    pub init_retries: usize,
    /// Keep per-sweep states and mode working data for the diagnostics.
    #[serde(default)]
    pub keep_snapshots: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            kappa: None,
            max_sweeps: 5000,
            tol_step: 1e-10,
            tol_kkt: 1e-8,
            seed: 0,
            init_retries: 20,
            keep_snapshots: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Config(format!("epsilon must be positive, got {e}")));
            }
        }
        if let Some(k) = self.kappa {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::Config(format!("kappa must be nonnegative, got {k}")));
            }
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be at least 1".into()));
        }
        for (name, v) in [("tol_step", self.tol_step), ("tol_kkt", self.tol_kkt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.init_retries == 0 {
            return Err(Error::Config("init_retries must be at least 1".into()));
        }
        Ok(())
    }

    pub fn epsilon_for(&self, a: &DenseTensor) -> f64 {
        self.epsilon.unwrap_or(1e-3 * a.frobenius())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxSweeps,
    AllTruncated,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub factors: FactorSet,
    /// Row 0 describes the initial point.
    pub trace: Vec<SweepRecord>,
    pub status: Status,
    /// Last sweep that removed a component (0 if none did).
    pub stabilization_sweep: usize,
    pub epsilon: f64,
    pub kappa: f64,
    pub a_norm_sq: f64,
    pub initial_rank: usize,
    /// Present when `keep_snapshots` was set; entry 0 is the initial point.
    pub snapshots: Vec<SweepSnapshot>,
}

impl SolveResult {
    pub fn last(&self) -> &SweepRecord {
        self.trace.last().expect("trace always holds the initial row")
    }

    pub fn total_truncated(&self) -> usize {
        self.trace.iter().map(|r| r.truncated.len()).sum()
    }
}

/// Random feasible start with `2g < ‖A‖²`, plus the truncation threshold.
pub fn init<R: Rng + ?Sized>(
    a: &DenseTensor,
    rank: usize,
    orth_modes: usize,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<(FactorSet, f64)> {
    let dims = a.shape().to_vec();
    let k = dims.len();
    if rank == 0 {
        return Err(Error::Config("rank must be at least 1".into()));
    }
    if let Some(&nmin) = dims.iter().min() {
        if rank > nmin {
            return Err(Error::Config(format!("rank {rank} exceeds smallest dimension {nmin}")));
        }
    }
    if orth_modes == 0 || orth_modes > k {
        return Err(Error::Config(format!("orthonormal modes must be in 1..={k}, got {orth_modes}")));
    }
    let a_norm_sq = a.frobenius_sq();
    if a_norm_sq == 0.0 {
        return Err(Error::Input("tensor is zero".into()));
    }
    for _ in 0..cfg.init_retries {
        let mut u = FactorSet::random(&dims, rank, orth_modes, rng)?;
        u.lambda = optimal_lambda(a, &u)?;
        let g = objective(a, &u)?;
        if 2.0 * g < a_norm_sq {
            let kappa = cfg
                .kappa
                .unwrap_or_else(|| 0.5 * ((a_norm_sq - 2.0 * g) / rank as f64).sqrt());
            return Ok((u, kappa));
        }
    }
    Err(Error::InitFailed {
        retries: cfg.init_retries,
    })
}

/// Result of one sweep.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub state: FactorSet,
    pub record: SweepRecord,
    pub modes: Vec<ModeWork>,
}

fn scale_columns(m: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s[j])
}

/// One pass over all modes starting from `state` (the previous iterate).
pub fn sweep<R: Rng + ?Sized>(
    a: &DenseTensor,
    state: &FactorSet,
    sweep_index: usize,
    kappa: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<SweepOutput> {
    if a.shape() != state.dims().as_slice() {
        return Err(dim_err(format!(
            "tensor shape {:?} does not match factor dims {:?}",
            a.shape(),
            state.dims()
        )));
    }
    let k = state.order();
    let s = state.orth_modes;
    let mut prev = state.clone();
    // Columns of modes < i are already updated, modes >= i still hold the
    // previous iterate: component j of `cur` is the point x^i_j.
    let mut cur = state.clone();
    let mut sigma_min = Vec::with_capacity(s);
    let mut proximal = Vec::with_capacity(s);
    let mut modes = Vec::with_capacity(k);
    let mut truncated = Vec::new();
    let mut truncation_jump = 0.0;
    let mut zero_contraction = false;

    for i in 0..k {
        let r = cur.rank();
        let n = cur.factors[i].nrows();
        let mut v = DMatrix::zeros(n, r);
        let mut lambda_in = DVector::zeros(r);
        for j in 0..r {
            let vj = a.contract_skip(&cur.component(j), i)?;
            lambda_in[j] = vj.iter().zip(col(&cur.factors[i], j)).map(|(x, y)| x * y).sum();
            v.column_mut(j).copy_from_slice(&vj);
        }

        let mut alpha = 0.0;
        if i < s {
            let y = scale_columns(&v, &lambda_in);
            let pf = linalg::polar_decompose(&y)?;
            sigma_min.push(pf.sigma_min);
            let q = if pf.sigma_min < epsilon {
                alpha = epsilon;
                proximal.push(true);
                linalg::polar_decompose(&(&y + &prev.factors[i] * epsilon))?.q
            } else {
                proximal.push(false);
                pf.q
            };
            cur.factors[i] = q;
        } else {
            for j in 0..r {
                let vj = v.column(j);
                let nrm = vj.norm();
                let u = if nrm == 0.0 {
                    zero_contraction = true;
                    linalg::random_unit_vector(n, rng)
                } else {
                    // sgn(0) := +1
                    let sign = if lambda_in[j] < 0.0 { -1.0 } else { 1.0 };
                    vj * (sign / nrm)
                };
                cur.factors[i].set_column(j, &u);
            }
        }

        let lambda_out = DVector::from_fn(r, |j, _| v.column(j).dot(&cur.factors[i].column(j)));

        if i + 1 == s {
            let cut: Vec<usize> = (0..r).filter(|&j| lambda_out[j].abs() < kappa).collect();
            if !cut.is_empty() {
                let mut mid = cur.clone();
                mid.lambda = lambda_out.clone();
                let before = objective(a, &mid)?;
                mid.remove_components(&cut);
                let after = if mid.rank() == 0 {
                    0.5 * a.frobenius_sq()
                } else {
                    objective(a, &mid)?
                };
                truncation_jump = after - before;
                cur.remove_components(&cut);
                prev.remove_components(&cut);
                truncated = cut;
                if cur.rank() == 0 {
                    return Err(Error::AllTruncated);
                }
            }
        }

        modes.push(ModeWork {
            v: (0..v.ncols()).map(|j| col(&v, j).to_vec()).collect(),
            lambda_in: lambda_in.as_slice().to_vec(),
            lambda_out: lambda_out.as_slice().to_vec(),
            alpha,
        });
    }

    cur.lambda = optimal_lambda(a, &cur)?;
    let step_sq = cur.factor_distance_sq(&prev);
    let lambda_sq = (&cur.lambda - &prev.lambda).norm_squared();
    let record = SweepRecord {
        sweep: sweep_index,
        objective: objective(a, &cur)?,
        step_norm: step_sq.sqrt(),
        joint_step_norm: (step_sq + lambda_sq).sqrt(),
        kkt_residual: diagnostics::kkt_residual(a, &cur)?,
        rank: cur.rank(),
        sigma_min,
        proximal,
        truncated,
        truncation_jump,
        zero_contraction,
    };
    Ok(SweepOutput {
        state: cur,
        record,
        modes,
    })
}

/// Initialize and sweep until both the step and the KKT residual are below
/// tolerance, the sweep budget runs out, or every component is truncated.
pub fn solve(a: &DenseTensor, rank: usize, orth_modes: usize, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let epsilon = cfg.epsilon_for(a);
    let mut rng = rng::stream(cfg.seed, streams::INIT);
    let (mut state, kappa) = init(a, rank, orth_modes, cfg, &mut rng)?;

    let mut trace = vec![SweepRecord::initial(
        objective(a, &state)?,
        diagnostics::kkt_residual(a, &state)?,
        state.rank(),
    )];
    let mut snapshots = Vec::new();
    if cfg.keep_snapshots {
        snapshots.push(SweepSnapshot {
            sweep: 0,
            state: FactorSetData::from(&state),
            modes: Vec::new(),
        });
    }

    let mut status = Status::MaxSweeps;
    for p in 1..=cfg.max_sweeps {
        let out = match sweep(a, &state, p, kappa, epsilon, &mut rng) {
            Ok(out) => out,
            Err(Error::AllTruncated) => {
                status = Status::AllTruncated;
                break;
            }
            Err(e) => return Err(e),
        };
        let done = out.record.step_norm <= cfg.tol_step && out.record.kkt_residual <= cfg.tol_kkt;
        if cfg.keep_snapshots {
            snapshots.push(SweepSnapshot {
                sweep: p,
                state: FactorSetData::from(&out.state),
                modes: out.modes,
            });
        }
        trace.push(out.record);
        state = out.state;
        if done {
            status = Status::Converged;
            break;
        }
    }

    let stabilization_sweep = trace
        .iter()
        .rev()
        .find(|r| !r.truncated.is_empty())
        .map_or(0, |r| r.sweep);
    log::debug!(
        "solve finished: {:?} after {} sweeps, rank {}",
        status,
        trace.len() - 1,
        state.rank()
    );
    Ok(SolveResult {
        factors: state,
        trace,
        status,
        stabilization_sweep,
        epsilon,
        kappa,
        a_norm_sq: a.frobenius_sq(),
        initial_rank: rank,
        snapshots,
    })
}
