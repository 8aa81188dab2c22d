use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg;
use crate::tensor::{col, rank1_sum, DenseTensor};

/// Decision variables `(U^(1), ..., U^(k), λ)`; the first `orth_modes` factor
/// matrices have orthonormal columns, the rest have unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub factors: Vec<DMatrix<f64>>,
    pub lambda: DVector<f64>,
    pub orth_modes: usize,
}

impl FactorSet {
    pub fn new(factors: Vec<DMatrix<f64>>, lambda: DVector<f64>, orth_modes: usize) -> Result<Self> {
        let fs = Self {
            factors,
            lambda,
            orth_modes,
        };
        fs.check_shapes()?;
        Ok(fs)
    }

    fn check_shapes(&self) -> Result<()> {
        let k = self.factors.len();
        if k == 0 {
            return Err(Error::Input("factor set needs at least one mode".into()));
        }
        if self.orth_modes == 0 || self.orth_modes > k {
            return Err(Error::Input(format!(
                "orthonormal mode count {} not in 1..={k}",
                self.orth_modes
            )));
        }
        let r = self.lambda.len();
        for (i, f) in self.factors.iter().enumerate() {
            if f.ncols() != r {
                return Err(dim_err(format!("factor {i} has {} columns, rank is {r}", f.ncols())));
            }
        }
        Ok(())
    }

    /// Random feasible point: orthonormal modes from `random_orthonormal`,
    /// the rest from `random_unit_columns`; λ is left at zero.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rank: usize, orth_modes: usize, rng: &mut R) -> Result<Self> {
        let factors = dims
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                if i < orth_modes {
                    linalg::random_orthonormal(n, rank, rng)
                } else {
                    linalg::random_unit_columns(n, rank, rng)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors, DVector::zeros(rank), orth_modes)
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    /// Mode vectors of component `j`.
    pub fn component(&self, j: usize) -> Vec<&[f64]> {
        self.factors.iter().map(|f| col(f, j)).collect()
    }

    pub fn to_tensor(&self) -> Result<DenseTensor> {
        rank1_sum(&self.factors, self.lambda.as_slice())
    }

    /// Drop components `cols` (sorted ascending) from every factor and from λ.
    pub fn remove_components(&mut self, cols: &[usize]) {
        if cols.is_empty() {
            return;
        }
        for f in &mut self.factors {
            *f = f.clone().remove_columns_at(cols);
        }
        self.lambda = self.lambda.clone().remove_rows_at(cols);
    }

    /// Largest violation of the manifold constraints: `‖UᵀU − I‖_F` over the
    /// orthonormal modes and `|‖u_j‖ − 1|` over the rest.
    pub fn feasibility_defect(&self) -> (f64, f64) {
        let mut stiefel = 0.0f64;
        let mut sphere = 0.0f64;
        for (i, f) in self.factors.iter().enumerate() {
            if i < self.orth_modes {
                stiefel = stiefel.max(linalg::orthonormality_defect(f));
            } else {
                for c in f.column_iter() {
                    sphere = sphere.max((c.norm() - 1.0).abs());
                }
            }
        }
        (stiefel, sphere)
    }

    /// `Σ_i ‖U^(i) − V^(i)‖_F²` over the factor blocks.
    pub fn factor_distance_sq(&self, other: &Self) -> f64 {
        self.factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| (a - b).norm_squared())
            .sum()
    }
}

/// `g(U, λ) = ½‖A − Σ_j λ_j u^(1)_j ⊗ ... ⊗ u^(k)_j‖²`.
pub fn objective(a: &DenseTensor, u: &FactorSet) -> Result<f64> {
    let psi = u.to_tensor()?;
    Ok(0.5 * a.sub(&psi)?.frobenius_sq())
}

/// `λ_j = A·(u^(1)_j, ..., u^(k)_j)`, the superdiagonal of
/// `((U^(1))ᵀ, ..., (U^(k))ᵀ)·A`.
pub fn optimal_lambda(a: &DenseTensor, u: &FactorSet) -> Result<DVector<f64>> {
    if a.shape() != u.dims().as_slice() {
        return Err(dim_err(format!(
            "tensor shape {:?} does not match factor dims {:?}",
            a.shape(),
            u.dims()
        )));
    }
    let vals = (0..u.rank())
        .map(|j| a.contract_full(&u.component(j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}

/// Serializable form: each factor as a list of columns.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FactorSetData {
    pub orth_modes: usize,
    pub lambda: Vec<f64>,
    pub factors: Vec<Vec<Vec<f64>>>,
}

impl From<&FactorSet> for FactorSetData {
    fn from(u: &FactorSet) -> Self {
        Self {
            orth_modes: u.orth_modes,
            lambda: u.lambda.as_slice().to_vec(),
            factors: u
                .factors
                .iter()
                .map(|f| (0..f.ncols()).map(|j| col(f, j).to_vec()).collect())
                .collect(),
        }
    }
}

impl TryFrom<&FactorSetData> for FactorSet {
    type Error = Error;

    fn try_from(d: &FactorSetData) -> Result<Self> {
        let factors = d
            .factors
            .iter()
            .map(|cols| {
                let n = cols.first().map_or(0, |c| c.len());
                if cols.iter().any(|c| c.len() != n) {
                    return Err(dim_err("ragged factor columns"));
                }
                let flat: Vec<f64> = cols.iter().flatten().copied().collect();
                Ok(DMatrix::from_vec(n, cols.len(), flat))
            })
            .collect::<Result<Vec<_>>>()?;
        FactorSet::new(factors, DVector::from_vec(d.lambda.clone()), d.orth_modes)
    }
}
