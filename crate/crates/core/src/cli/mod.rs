//! Command-line front end.
//!
//! Exit codes: 0 success (or `Converged`), 1 usage/input/config error,
//! 2 `MaxSweeps` or failed checks, 3 `AllTruncated`.

pub mod artifacts;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use artifacts::{
    file_digest, read_json, to_json, write_atomic, Outputs, ResultSummary, RunManifest, StoredRun, MANIFEST_FILE,
    RESULT_FILE, STATES_FILE, TRACE_FILE,
};

use crate::diagnostics::{self, rate_fit_result, RateFit};
use crate::error::{Error, Result};
use crate::generate::{self, GenSpec};
use crate::nlslab;
use crate::rng::{self, streams};
use crate::solver::{self, write_trace_csv, SolveResult, SolverConfig, Status};
use crate::tensor::DenseTensor;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_SWEEPS: i32 = 2;
pub const EXIT_CHECKS_FAILED: i32 = 2;
pub const EXIT_ALL_TRUNCATED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "potensor", version, about = "Partially orthogonal low-rank tensor approximation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a test tensor in .dtf format.
    Gen(GenArgs),
    /// Fit a rank-r partially orthogonal approximation.
    Solve(SolveArgs),
    /// Re-run the trace checks on a solve output directory.
    Diagnose(DiagnoseArgs),
    /// Batch experiments.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Generator name (gaussian, planted).
    #[arg(long, default_value = "gaussian")]
    pub kind: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, default_value_t = 1)]
    pub orth_modes: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Input tensor (.dtf); taken from the manifest with --replay.
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub orth_modes: usize,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_step: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_kkt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for trace.csv, result.json, states.json and manifest.json.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Rerun from a manifest; other solver flags are ignored.
    #[arg(long, conflicts_with = "input")]
    pub replay: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// Directory written by `solve --trace`.
    pub dir: PathBuf,
    /// Subset of checks to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub checks: Vec<String>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Experiment {
    /// Multi-start critical point search on random targets.
    Location(LocationArgs),
    /// Convergence-rate fits over seeded Gaussian tensors.
    Rate(RateArgs),
}

#[derive(Args, Debug)]
pub struct LocationArgs {
    /// Problem name (hyperboloid, lu).
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 100)]
    pub num_b: usize,
    #[arg(long, default_value_t = 200)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the minima histogram as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RateArgs {
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, value_delimiter = ',', default_value = "3,3,3,3")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    #[arg(long, default_value_t = 1)]
    pub orth_modes: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol_step: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_kkt: f64,
    #[arg(long, default_value_t = 20000)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `args` and run; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let first = e.to_string();
            eprintln!("{}", first.lines().next().unwrap_or("invalid arguments"));
            return EXIT_ERROR;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
        Command::Experiment(Experiment::Location(a)) => cmd_location(&a),
        Command::Experiment(Experiment::Rate(a)) => cmd_rate(&a),
    }
}

fn emit(json: &str, out: Option<&Path>) -> Result<()> {
    if let Some(p) = out {
        write_atomic(p, json.as_bytes())?;
    }
    print!("{json}");
    Ok(())
}

/// Sidecar path `X.truth.json` for output `X.dtf`.
pub fn truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

#[derive(Serialize)]
struct GenReport {
    out: PathBuf,
    sha256: String,
    truth: Option<PathBuf>,
}

pub fn cmd_gen(a: &GenArgs) -> Result<i32> {
    let spec = GenSpec {
        dims: a.dims.clone(),
        rank: a.rank,
        orth_modes: a.orth_modes,
        noise: a.noise,
    };
    let g = generate::generate(&a.kind, &spec, a.seed)?;
    let text = g.tensor.to_dtf();
    write_atomic(&a.out, text.as_bytes())?;
    let truth = match &g.truth {
        Some(t) => {
            let p = truth_path(&a.out);
            write_atomic(&p, to_json(t)?.as_bytes())?;
            Some(p)
        }
        None => None,
    };
    log::info!("wrote {} ({:?})", a.out.display(), g.tensor.shape());
    emit(
        &to_json(&GenReport {
            out: a.out.clone(),
            sha256: artifacts::sha256_hex(text.as_bytes()),
            truth,
        })?,
        None,
    )?;
    Ok(EXIT_OK)
}

fn status_code(s: Status) -> i32 {
    match s {
        Status::Converged => EXIT_OK,
        Status::MaxSweeps => EXIT_MAX_SWEEPS,
        Status::AllTruncated => EXIT_ALL_TRUNCATED,
    }
}

fn manifest_for(a: &SolveArgs) -> Result<RunManifest> {
    if let Some(m) = &a.replay {
        let mut manifest: RunManifest = read_json(m)?;
        manifest.verify_input()?;
        if let Some(dir) = &a.trace {
            manifest.outputs = outputs_in(dir);
        }
        return Ok(manifest);
    }
    let input = a
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("an input file or --replay is required".into()))?;
    let rank = a.rank.ok_or_else(|| Error::Config("--rank is required".into()))?;
    if rank == 0 {
        return Err(Error::Config("--rank must be at least 1".into()));
    }
    let input = input
        .canonicalize()
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", input.display())))?;
    let config = SolverConfig {
        epsilon: a.epsilon,
        kappa: a.kappa,
        max_sweeps: a.max_sweeps,
        tol_step: a.tol_step,
        tol_kkt: a.tol_kkt,
        seed: a.seed,
        keep_snapshots: a.trace.is_some(),
        ..SolverConfig::default()
    };
    config.validate()?;
    Ok(RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input_sha256: file_digest(&input)?,
        input,
        rank,
        orth_modes: a.orth_modes,
        seed: a.seed,
        config,
        outputs: outputs_in(a.trace.as_deref().unwrap_or(Path::new("."))),
    })
}

fn outputs_in(dir: &Path) -> Outputs {
    Outputs {
        trace_csv: dir.join(TRACE_FILE),
        result_json: dir.join(RESULT_FILE),
        states_json: dir.join(STATES_FILE),
    }
}

pub fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let manifest = manifest_for(a)?;
    let tensor = DenseTensor::read_dtf(&manifest.input)?;
    log::info!(
        "solving {} (shape {:?}) rank {} orth modes {}",
        manifest.input.display(),
        tensor.shape(),
        manifest.rank,
        manifest.orth_modes
    );
    let result = solver::solve(&tensor, manifest.rank, manifest.orth_modes, &manifest.config)?;
    let summary = to_json(&ResultSummary::from(&result))?;
    let write_trace = a.trace.is_some() || a.replay.is_some();
    if write_trace {
        let dir = manifest
            .outputs
            .trace_csv
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(&dir)?;
        }
        let o = &manifest.outputs;
        write_atomic(&o.trace_csv, write_trace_csv(&result.trace, manifest.orth_modes).as_bytes())?;
        write_atomic(&o.result_json, summary.as_bytes())?;
        write_atomic(&o.states_json, serde_json::to_string(&StoredRun::from(&result))?.as_bytes())?;
        write_atomic(&dir.join(MANIFEST_FILE), to_json(&manifest)?.as_bytes())?;
    }
    log::info!("{:?} after {} sweeps", result.status, result.trace.len() - 1);
    print!("{summary}");
    Ok(status_code(result.status))
}

/// Rebuild a run from a `solve --trace` directory, checking the input digest.
pub fn load_run(dir: &Path) -> Result<(RunManifest, DenseTensor, SolveResult)> {
    let manifest: RunManifest = read_json(&dir.join(MANIFEST_FILE))?;
    manifest.verify_input()?;
    let tensor = DenseTensor::read_dtf(&manifest.input)?;
    let stored: StoredRun = read_json(&dir.join(STATES_FILE))?;
    Ok((manifest, tensor, SolveResult::try_from(stored)?))
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> Result<i32> {
    let (_, tensor, result) = load_run(&a.dir)?;
    let report = diagnostics::diagnose(&tensor, &result, &a.checks)?;
    emit(&to_json(&report)?, a.out.as_deref())?;
    Ok(if report.all_passed { EXIT_OK } else { EXIT_CHECKS_FAILED })
}

pub fn cmd_location(a: &LocationArgs) -> Result<i32> {
    let summary = nlslab::location_experiment(&a.kind, a.num_b, a.starts, a.seed)?;
    if let Some(p) = &a.csv {
        write_atomic(p, summary.histogram_csv().as_bytes())?;
    }
    log::info!("{} violations over {} targets", summary.violations, summary.num_b);
    emit(&to_json(&summary)?, a.out.as_deref())?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRecord {
    pub index: usize,
    pub tensor_seed: u64,
    pub solver_seed: u64,
    pub status: Status,
    pub sweeps: usize,
    pub stabilization_sweep: usize,
    pub final_step_norm: f64,
    pub final_kkt_residual: f64,
    pub rate_fit: Option<RateFit>,
    pub rate_fit_error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateSummary {
    pub seed: u64,
    pub dims: Vec<usize>,
    pub rank: usize,
    pub orth_modes: usize,
    pub linear: usize,
    pub records: Vec<RateRecord>,
}

/// Tensor `i` is Gaussian from generation seed `seed + i`; the solver uses
/// the same seed.
pub fn rate_experiment(
    seed: u64,
    count: usize,
    dims: &[usize],
    rank: usize,
    orth_modes: usize,
    cfg: &SolverConfig,
) -> Result<(RateSummary, Vec<SolveResult>)> {
    if count == 0 {
        return Err(Error::Config("seeds must be at least 1".into()));
    }
    let spec = GenSpec {
        dims: dims.to_vec(),
        rank,
        orth_modes,
        noise: 0.0,
    };
    let runs = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let mut r = rng::stream(s, streams::RATE);
            let tensor = generate::by_name("gaussian")?.generate(&spec, &mut r)?.tensor;
            let result = solver::solve(&tensor, rank, orth_modes, &SolverConfig { seed: s, ..cfg.clone() })?;
            let (rate_fit, rate_fit_error) = match rate_fit_result(&result) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let last = result.last();
            let record = RateRecord {
                index: i,
                tensor_seed: s,
                solver_seed: s,
                status: result.status,
                sweeps: result.trace.len() - 1,
                stabilization_sweep: result.stabilization_sweep,
                final_step_norm: last.step_norm,
                final_kkt_residual: last.kkt_residual,
                rate_fit,
                rate_fit_error,
            };
            Ok((record, result))
        })
        .collect::<Result<Vec<_>>>()?;
    let (records, results): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let linear = records
        .iter()
        .filter(|r| r.rate_fit.as_ref().is_some_and(|f| !f.sublinear))
        .count();
    Ok((
        RateSummary {
            seed,
            dims: dims.to_vec(),
            rank,
            orth_modes,
            linear,
            records,
        },
        results,
    ))
}

pub fn cmd_rate(a: &RateArgs) -> Result<i32> {
    let cfg = SolverConfig {
        max_sweeps: a.max_sweeps,
        tol_step: a.tol_step,
        tol_kkt: a.tol_kkt,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    let (summary, _) = rate_experiment(a.seed, a.seeds, &a.dims, a.rank, a.orth_modes, &cfg)?;
    log::info!("{} of {} runs fit a linear rate", summary.linear, a.seeds);
    emit(&to_json(&summary)?, a.out.as_deref())?;
    Ok(EXIT_OK)
}

/// Size the global thread pool from `POTENSOR_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("POTENSOR_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("POTENSOR_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}
