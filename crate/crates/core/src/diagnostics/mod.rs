//! First-order diagnostics for the partially orthogonal approximation problem
//! and per-trace checks of the inequalities that drive its convergence.

mod checks;
mod rate;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use checks::{
    check_feasibility, check_monotone, check_subgrad_bound, check_sufficient_decrease,
    check_truncation, registry, CheckContext, CheckReport, TraceCheck, Violation,
};
pub use rate::{rate_fit, rate_fit_result, RateFit, MIN_WINDOW_POINTS, SUBLINEAR_Q, SUBLINEAR_R2};

use crate::error::Result;
use crate::linalg::symmetric_part;
use crate::solver::{FactorSet, SolveResult};
use crate::tensor::DenseTensor;

/// Blocks `(G^(1), ..., G^(k), g_λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub factors: Vec<DMatrix<f64>>,
    pub lambda: DVector<f64>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.block_norms().iter().map(|b| b * b).sum::<f64>().sqrt()
    }

    /// Frobenius norm of each factor block followed by the λ block.
    pub fn block_norms(&self) -> Vec<f64> {
        self.factors
            .iter()
            .map(|g| g.norm())
            .chain(std::iter::once(self.lambda.norm()))
            .collect()
    }
}

/// `V^(i)` with columns `A·τ_i(x_j)` at the full point `x_j = (u^(1)_j, ..., u^(k)_j)`.
pub fn contraction_matrices(a: &DenseTensor, u: &FactorSet) -> Result<Vec<DMatrix<f64>>> {
    let r = u.rank();
    (0..u.order())
        .map(|i| {
            let mut v = DMatrix::zeros(u.factors[i].nrows(), r);
            for j in 0..r {
                let vj = a.contract_skip(&u.component(j), i)?;
                v.column_mut(j).copy_from_slice(&vj);
            }
            Ok(v)
        })
        .collect()
}

/// `G^(i) = −V^(i) Γ + U^(i) Γ²` and `g_λ = λ − Diag_k((U^(1)ᵀ, ..., U^(k)ᵀ)·A)`
/// with `Γ = diag(λ)`.
///
/// For a single orthonormal mode this differs from the Euclidean gradient of
/// `g` by a term of the form `U^(1) X` with `X` symmetric, which the tangent
/// projection removes.
pub fn gradient(a: &DenseTensor, u: &FactorSet) -> Result<Gradient> {
    let v = contraction_matrices(a, u)?;
    let lam = &u.lambda;
    let factors = v
        .iter()
        .zip(&u.factors)
        .map(|(vi, ui)| {
            DMatrix::from_fn(ui.nrows(), ui.ncols(), |row, j| {
                -vi[(row, j)] * lam[j] + ui[(row, j)] * lam[j] * lam[j]
            })
        })
        .collect();
    let diag = DVector::from_fn(u.rank(), |j, _| v[0].column(j).dot(&u.factors[0].column(j)));
    Ok(Gradient {
        factors,
        lambda: lam - diag,
    })
}

/// Remove the normal component of each block: `U sym(UᵀG)` on orthonormal
/// modes, `u_j (u_jᵀ g_j)` column-wise on unit-column modes; λ is untouched.
pub fn project_tangent(u: &FactorSet, g: &Gradient) -> Gradient {
    let factors = g
        .factors
        .iter()
        .zip(&u.factors)
        .enumerate()
        .map(|(i, (gi, ui))| {
            if i < u.orth_modes {
                gi - ui * symmetric_part(&(ui.transpose() * gi))
            } else {
                let mut out = gi.clone();
                for j in 0..ui.ncols() {
                    let uj = ui.column(j);
                    let d = uj.dot(&gi.column(j));
                    out.column_mut(j).axpy(-d, &uj, 1.0);
                }
                out
            }
        })
        .collect();
    Gradient {
        factors,
        lambda: g.lambda.clone(),
    }
}

/// Per-block norms of the projected gradient (factor blocks, then λ).
pub fn kkt_blocks(a: &DenseTensor, u: &FactorSet) -> Result<Vec<f64>> {
    Ok(project_tangent(u, &gradient(a, u)?).block_norms())
}

/// Norm of the projected gradient; zero exactly at KKT points.
pub fn kkt_residual(a: &DenseTensor, u: &FactorSet) -> Result<f64> {
    Ok(project_tangent(u, &gradient(a, u)?).norm())
}

/// Full diagnostics report, emitted as JSON by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub all_passed: bool,
    pub checks: Vec<CheckReport>,
    pub rate_fit: Option<RateFit>,
    pub rate_fit_error: Option<String>,
}

/// Run the named checks (all registered checks when `names` is empty) and
/// the rate fit.
pub fn diagnose(a: &DenseTensor, result: &SolveResult, names: &[String]) -> Result<DiagnosticsReport> {
    let ctx = CheckContext { tensor: a, result };
    let selected = checks::select(names)?;
    let checks: Vec<CheckReport> = selected.iter().map(|c| c.run(&ctx)).collect::<Result<_>>()?;
    let (rate_fit, rate_fit_error) = match rate_fit_result(result) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(DiagnosticsReport {
        all_passed: checks.iter().all(|c| c.passed),
        checks,
        rate_fit,
        rate_fit_error,
    })
}
