use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::FactorSetData;

/// Per-sweep observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub objective: f64,
    /// `‖U_[p] − U_[p−1]‖_F` over the surviving components.
    pub step_norm: f64,
    /// Same, including the λ block.
    pub joint_step_norm: f64,
    pub kkt_residual: f64,
    /// Rank after the sweep.
    pub rank: usize,
    /// Smallest singular value of `V Λ` per orthonormal mode, before any
    /// proximal correction.
    pub sigma_min: Vec<f64>,
    pub proximal: Vec<bool>,
    /// Component indices (positions at the start of the sweep) removed.
    pub truncated: Vec<usize>,
    /// Objective change caused by the removal itself.
    pub truncation_jump: f64,
    /// Some least-squares contraction vanished and a column was re-drawn.
    pub zero_contraction: bool,
}

impl SweepRecord {
    pub(crate) fn initial(objective: f64, kkt_residual: f64, rank: usize) -> Self {
        Self {
            sweep: 0,
            objective,
            step_norm: 0.0,
            joint_step_norm: 0.0,
            kkt_residual,
            rank,
            sigma_min: Vec::new(),
            proximal: Vec::new(),
            truncated: Vec::new(),
            truncation_jump: 0.0,
            zero_contraction: false,
        }
    }

    pub fn is_truncation(&self) -> bool {
        !self.truncated.is_empty()
    }
}

/// Working data of one mode inside a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeWork {
    /// Columns `v_j = A·τ_i(x^i_j)`.
    pub v: Vec<Vec<f64>>,
    /// `A·τ(x^i_j)`, coefficients before this mode's update.
    pub lambda_in: Vec<f64>,
    /// `A·τ(x^{i+1}_j)`, coefficients after this mode's update.
    pub lambda_out: Vec<f64>,
    /// Proximal weight used (0 or ε); always 0 for least-squares modes.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSnapshot {
    pub sweep: usize,
    pub state: FactorSetData,
    pub modes: Vec<ModeWork>,
}

/// Trace as CSV, one row per sweep in order.
pub fn write_trace_csv(trace: &[SweepRecord], orth_modes: usize) -> String {
    let mut out = String::from("sweep,objective,step_norm,joint_step_norm,kkt_residual,rank");
    for i in 1..=orth_modes {
        let _ = write!(out, ",sigma_min_{i}");
    }
    out.push_str(",proximal_count,truncated\n");
    for r in trace {
        let _ = write!(
            out,
            "{},{:e},{:e},{:e},{:e},{}",
            r.sweep, r.objective, r.step_norm, r.joint_step_norm, r.kkt_residual, r.rank
        );
        for i in 0..orth_modes {
            match r.sigma_min.get(i) {
                Some(s) => {
                    let _ = write!(out, ",{s:e}");
                }
                None => out.push(','),
            }
        }
        let truncated: Vec<String> = r.truncated.iter().map(|j| j.to_string()).collect();
        let _ = writeln!(
            out,
            ",{},{}",
            r.proximal.iter().filter(|&&p| p).count(),
            truncated.join(";")
        );
    }
    out
}
