//! Low-rank approximation of tensors with some orthonormal factor matrices,
//! first-order diagnostics, and small critical-point experiments.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod generate;
pub mod linalg;
pub mod nlslab;
pub mod rng;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use solver::{solve, FactorSet, SolveResult, SolverConfig, Status};
pub use tensor::DenseTensor;
