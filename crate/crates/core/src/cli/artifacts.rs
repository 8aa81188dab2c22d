//! On-disk artifacts of a run: manifest, stored states, result summary.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{rate_fit_result, RateFit};
use crate::error::{Error, Result};
use crate::solver::{FactorSet, FactorSetData, SolveResult, SolverConfig, Status, SweepRecord, SweepSnapshot};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const RESULT_FILE: &str = "result.json";
pub const STATES_FILE: &str = "states.json";

/// Write via a temporary file in the target directory and rename into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Digest of the column-major little-endian bytes of `m`.
pub fn matrix_digest(m: &DMatrix<f64>) -> String {
    let bytes: Vec<u8> = m.iter().flat_map(|v| v.to_le_bytes()).collect();
    sha256_hex(&bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub trace_csv: PathBuf,
    pub result_json: PathBuf,
    pub states_json: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub input: PathBuf,
    pub input_sha256: String,
    pub rank: usize,
    pub orth_modes: usize,
    pub seed: u64,
    pub config: SolverConfig,
    pub outputs: Outputs,
}

impl RunManifest {
    /// Fails when the input file no longer matches the recorded digest.
    pub fn verify_input(&self) -> Result<()> {
        let digest = file_digest(&self.input)?;
        if digest != self.input_sha256 {
            return Err(Error::Input(format!(
                "input {} changed: digest {} does not match manifest {}",
                self.input.display(),
                digest,
                self.input_sha256
            )));
        }
        Ok(())
    }
}

/// Everything needed to rebuild a [`SolveResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRun {
    pub status: Status,
    pub stabilization_sweep: usize,
    pub epsilon: f64,
    pub kappa: f64,
    pub a_norm_sq: f64,
    pub initial_rank: usize,
    pub factors: FactorSetData,
    pub trace: Vec<SweepRecord>,
    pub snapshots: Vec<SweepSnapshot>,
}

impl From<&SolveResult> for StoredRun {
    fn from(r: &SolveResult) -> Self {
        Self {
            status: r.status,
            stabilization_sweep: r.stabilization_sweep,
            epsilon: r.epsilon,
            kappa: r.kappa,
            a_norm_sq: r.a_norm_sq,
            initial_rank: r.initial_rank,
            factors: FactorSetData::from(&r.factors),
            trace: r.trace.clone(),
            snapshots: r.snapshots.clone(),
        }
    }
}

impl TryFrom<StoredRun> for SolveResult {
    type Error = Error;

    fn try_from(s: StoredRun) -> Result<Self> {
        Ok(Self {
            factors: FactorSet::try_from(&s.factors)?,
            trace: s.trace,
            status: s.status,
            stabilization_sweep: s.stabilization_sweep,
            epsilon: s.epsilon,
            kappa: s.kappa,
            a_norm_sq: s.a_norm_sq,
            initial_rank: s.initial_rank,
            snapshots: s.snapshots,
        })
    }
}

/// Machine-readable result of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub status: Status,
    pub sweeps: usize,
    pub objective: f64,
    pub kkt_residual: f64,
    pub step_norm: f64,
    pub rank: usize,
    pub initial_rank: usize,
    pub stabilization_sweep: usize,
    pub truncated_total: usize,
    pub epsilon: f64,
    pub kappa: f64,
    pub lambda: Vec<f64>,
    pub factor_digests: Vec<String>,
    pub rate_fit: Option<RateFit>,
    pub rate_fit_error: Option<String>,
}

impl From<&SolveResult> for ResultSummary {
    fn from(r: &SolveResult) -> Self {
        let last = r.last();
        let (rate_fit, rate_fit_error) = match rate_fit_result(r) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            status: r.status,
            sweeps: r.trace.len() - 1,
            objective: last.objective,
            kkt_residual: last.kkt_residual,
            step_norm: last.step_norm,
            rank: r.factors.rank(),
            initial_rank: r.initial_rank,
            stabilization_sweep: r.stabilization_sweep,
            truncated_total: r.total_truncated(),
            epsilon: r.epsilon,
            kappa: r.kappa,
            lambda: r.factors.lambda.iter().copied().collect(),
            factor_digests: r.factors.factors.iter().map(matrix_digest).collect(),
            rate_fit,
            rate_fit_error,
        }
    }
}
