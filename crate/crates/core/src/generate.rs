//! Test tensor generators, registered by name.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SeededRng};
use crate::solver::{FactorSet, FactorSetData};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub dims: Vec<usize>,
    pub rank: usize,
    pub orth_modes: usize,
    /// Relative noise level: the noise tensor has norm `noise·‖signal‖`.
    pub noise: f64,
}

impl GenSpec {
    fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::Input(format!("dims must be nonempty and positive, got {:?}", self.dims)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise must be nonnegative, got {}", self.noise)));
        }
        Ok(())
    }
}

/// Ground truth of a planted tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub spec: GenSpec,
    pub factors: FactorSetData,
    pub signal_norm: f64,
    pub noise_norm: f64,
}

pub struct Generated {
    pub tensor: DenseTensor,
    pub truth: Option<Truth>,
}

pub trait TensorGenerator: Send + Sync {
    fn name(&self) -> &'static str;
    fn generate(&self, spec: &GenSpec, rng: &mut SeededRng) -> Result<Generated>;
}

/// I.i.d. standard normal entries; `rank`, `orth_modes` and `noise` are ignored.
pub struct Gaussian;

/// Random feasible rank-`r` point with `λ_j = ±U[1, 2]`, plus scaled Gaussian noise.
pub struct Planted;

impl TensorGenerator for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn generate(&self, spec: &GenSpec, rng: &mut SeededRng) -> Result<Generated> {
        spec.validate()?;
        let len = spec.dims.iter().product();
        Ok(Generated {
            tensor: DenseTensor::new(spec.dims.clone(), rng::gaussian_vec(rng, len))?,
            truth: None,
        })
    }
}

impl TensorGenerator for Planted {
    fn name(&self) -> &'static str {
        "planted"
    }

    fn generate(&self, spec: &GenSpec, rng: &mut SeededRng) -> Result<Generated> {
        spec.validate()?;
        let min_dim = spec.dims.iter().copied().min().unwrap_or(0);
        if spec.rank == 0 || spec.rank > min_dim {
            return Err(Error::Config(format!("planted rank must be in 1..={min_dim}, got {}", spec.rank)));
        }
        let mut u = FactorSet::random(&spec.dims, spec.rank, spec.orth_modes, rng)?;
        u.lambda = DVector::from_fn(spec.rank, |_, _| {
            let mag = rng.random_range(1.0..2.0);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        });
        let signal = u.to_tensor()?;
        let signal_norm = signal.frobenius();
        let (tensor, noise_norm) = if spec.noise > 0.0 {
            let g = DenseTensor::new(spec.dims.clone(), rng::gaussian_vec(rng, signal.len()))?;
            let scale = spec.noise * signal_norm / g.frobenius();
            (signal.add(&g.scaled(scale))?, spec.noise * signal_norm)
        } else {
            (signal, 0.0)
        };
        Ok(Generated {
            tensor,
            truth: Some(Truth {
                spec: spec.clone(),
                factors: FactorSetData::from(&u),
                signal_norm,
                noise_norm,
            }),
        })
    }
}

pub fn registry() -> Vec<Box<dyn TensorGenerator>> {
    vec![Box::new(Gaussian), Box::new(Planted)]
}

pub fn by_name(name: &str) -> Result<Box<dyn TensorGenerator>> {
    let all = registry();
    let available = all.iter().map(|g| g.name()).collect::<Vec<_>>().join(", ");
    all.into_iter()
        .find(|g| g.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "generator",
            name: name.to_string(),
            available,
        })
}

/// Generate with the generator named `kind` from `seed`'s generation stream.
pub fn generate(kind: &str, spec: &GenSpec, seed: u64) -> Result<Generated> {
    by_name(kind)?.generate(spec, &mut rng::stream(seed, rng::streams::GENERATE))
}
