//! Executing a scenario and writing its CSV and metadata sidecar.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use vtrap_core::{
    build_rhs, convergence_report, eval_cw, eval_pulse_train, new_ground_state, run_ensemble, run_trajectory,
    run_trajectory_with, ConvergenceReport, DynamicsError, EnsembleError, EnsembleResult, EnsembleSpec, FieldError,
    FieldSpec, IntegrationOptions, RealizationRunner, TrajectoryRecord,
};

use crate::config::{parse_config, render_config, ConfigError, ScenarioConfig, ScenarioKind};
use crate::{EXIT_CONFIG, EXIT_FAILURE, EXIT_INVARIANT};

/// Population deviation between the `dt` and `dt/2` runs that flags a run.
pub const GUARD_THRESHOLD: f64 = 1e-6;

/// Realizations re-integrated by the grid guard of an ensemble run.
pub const GUARD_REALIZATIONS: usize = 4;

pub const METADATA_FORMAT: &str = "vtrap-run/1";

pub const CSV_COLUMNS: [&str; 9] =
    ["t_fs", "rho_gg", "rho_11", "rho_22", "rho_tt", "re_rho12", "im_rho12", "abs_rho12", "C"];

pub const ENSEMBLE_COLUMNS: [&str; 4] = ["stderr_re_rho12", "stderr_im_rho12", "stderr_rho12", "mean_abs_rho12"];

/// Token written for an undefined coherence fraction.
pub const NA: &str = "NA";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("bad metadata: {0}")]
    Metadata(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Field(FieldError::GridTooCoarse { .. } | FieldError::GridTooShort { .. } | FieldError::InvalidSpec(_)) => {
                EXIT_CONFIG
            }
            RunError::Dynamics(DynamicsError::InvariantViolation { .. })
            | RunError::Ensemble(EnsembleError::Realization { source: DynamicsError::InvariantViolation { .. }, .. }) => {
                EXIT_INVARIANT
            }
            RunError::Dynamics(DynamicsError::Params(_) | DynamicsError::WrongScenario { .. })
            | RunError::Ensemble(EnsembleError::TooFew(_) | EnsembleError::SeedCount { .. }) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Conditions that do not abort a run but make it exit with the flag code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RunFlag {
    GridGuard { max_population_deviation: f64, threshold: f64 },
    ConvergenceNotReached { achieved: f64, target: f64, recommended_n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuardResult {
    pub max_population_deviation: f64,
    pub threshold: f64,
    pub flagged: bool,
    /// Number of realizations re-run, for ensembles.
    pub realizations_checked: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub base_seed: u64,
    pub rule: String,
    pub n_realizations: usize,
    pub first_seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub t_start_fs: f64,
    pub t_end_fs: f64,
    pub dt_fs: f64,
    pub n_steps: usize,
}

/// Sidecar written next to every CSV; enough to replay the run exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub format: String,
    pub code_version: String,
    pub scenario: ScenarioKind,
    /// The config with every key explicit.
    pub config: String,
    pub field_digest: String,
    pub grid: GridSummary,
    pub seeds: Option<SeedInfo>,
    pub grid_guard: Option<GuardResult>,
    pub convergence: Option<ConvergenceReport>,
    pub flags: Vec<RunFlag>,
    pub csv_file: Option<String>,
    pub csv_rows: usize,
    pub csv_sha256: String,
}

#[derive(Clone, Debug)]
pub enum RunData {
    Trajectory(TrajectoryRecord),
    Ensemble(EnsembleResult),
}

impl RunData {
    pub fn record(&self) -> &TrajectoryRecord {
        match self {
            RunData::Trajectory(r) => r,
            RunData::Ensemble(e) => &e.mean_record,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub data: RunData,
    pub csv: Vec<u8>,
    pub metadata: RunMetadata,
}

impl RunOutcome {
    pub fn record(&self) -> &TrajectoryRecord {
        self.data.record()
    }

    pub fn flagged(&self) -> bool {
        !self.metadata.flags.is_empty()
    }
}

pub fn ensemble_spec(config: &ScenarioConfig) -> Option<EnsembleSpec> {
    let (FieldSpec::NoisyPulse(field), Some(e)) = (&config.field, &config.ensemble) else {
        return None;
    };
    Some(EnsembleSpec {
        n_realizations: e.n_realizations,
        base_seed: e.base_seed,
        params: config.params(),
        field: field.clone(),
        grid: config.time_grid(),
        convergence_target: e.convergence_target,
        measure: e.measure,
        explicit_seeds: None,
    })
}

/// Runs a validated config entirely in memory.
pub fn execute(config: &ScenarioConfig) -> Result<RunOutcome, RunError> {
    let grid = config.time_grid();
    let fine = IntegrationOptions { substeps: 2, ..IntegrationOptions::default() };
    let mut flags = Vec::new();
    let (data, guard, seeds, convergence, digest) = match ensemble_spec(config) {
        None => {
            let rhs = build_rhs(&config.params())?;
            let field = match &config.field {
                FieldSpec::PulseTrain(s) => eval_pulse_train(s, &grid)?,
                FieldSpec::Cw(s) => eval_cw(s, &grid)?,
                FieldSpec::NoisyPulse(_) => unreachable!("noisy scenarios always carry an ensemble"),
            };
            let rec = run_trajectory(&rhs, &field, &new_ground_state())?;
            let guard = if config.output.grid_guard {
                let refined = run_trajectory_with(&rhs, &field, &new_ground_state(), &fine)?;
                Some(guard_result(rec.max_population_deviation(&refined), None))
            } else {
                None
            };
            let digest = rec.field_spec_digest.clone();
            (RunData::Trajectory(rec), guard, None, None, digest)
        }
        Some(spec) => {
            let result = run_ensemble(&spec)?;
            let guard = if config.output.grid_guard {
                let runner = RealizationRunner::new(&spec.params, &spec.field, &spec.grid)?;
                let checked = GUARD_REALIZATIONS.min(spec.n_realizations);
                let mut dev: f64 = 0.0;
                for k in 0..checked {
                    let seed = spec.seed(k);
                    let wrap = |source| EnsembleError::Realization { index: k, seed, source };
                    let a = runner.run(seed, &IntegrationOptions::default()).map_err(wrap)?;
                    let b = runner.run(seed, &fine).map_err(wrap)?;
                    dev = dev.max(a.max_population_deviation(&b));
                }
                Some(guard_result(dev, Some(checked)))
            } else {
                None
            };
            for w in &result.warnings {
                let vtrap_core::EnsembleWarning::ConvergenceNotReached { achieved, target, recommended_n } = *w;
                flags.push(RunFlag::ConvergenceNotReached { achieved, target, recommended_n });
            }
            let seeds = SeedInfo {
                base_seed: spec.base_seed,
                rule: "seed_k = splitmix64(base_seed + (k + 1) * 0x9E3779B97F4A7C15)".into(),
                n_realizations: spec.n_realizations,
                first_seeds: result.seeds.iter().take(8).copied().collect(),
            };
            let report = convergence_report(&result, spec.convergence_target);
            let digest = result.mean_record.field_spec_digest.clone();
            (RunData::Ensemble(result), guard, Some(seeds), Some(report), digest)
        }
    };
    if let Some(g) = &guard {
        if g.flagged {
            flags.insert(0, RunFlag::GridGuard { max_population_deviation: g.max_population_deviation, threshold: g.threshold });
        }
    }
    let csv = render_csv(&data)?;
    let metadata = RunMetadata {
        format: METADATA_FORMAT.into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        scenario: config.scenario,
        config: render_config(config),
        field_digest: digest,
        grid: GridSummary { t_start_fs: grid.t_start, t_end_fs: grid.t_end, dt_fs: grid.dt, n_steps: grid.n_steps },
        seeds,
        grid_guard: guard,
        convergence,
        flags,
        csv_file: None,
        csv_rows: grid.len(),
        csv_sha256: sha256_hex(&csv),
    };
    Ok(RunOutcome { data, csv, metadata })
}

fn guard_result(dev: f64, realizations: Option<usize>) -> GuardResult {
    GuardResult {
        max_population_deviation: dev,
        threshold: GUARD_THRESHOLD,
        flagged: !(dev <= GUARD_THRESHOLD),
        realizations_checked: realizations,
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// CSV bytes for a run: the fixed columns, then the ensemble columns.
pub fn render_csv(data: &RunData) -> Result<Vec<u8>, RunError> {
    let rec = data.record();
    let ens = match data {
        RunData::Ensemble(e) => Some(e),
        RunData::Trajectory(_) => None,
    };
    let per_realization_c = ens.and_then(|e| e.per_realization_c.as_ref());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = CSV_COLUMNS.to_vec();
    if ens.is_some() {
        header.extend(ENSEMBLE_COLUMNS);
    }
    if per_realization_c.is_some() {
        header.push("C_per_realization");
    }
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..rec.len() {
        row.clear();
        let z = rec.rho_12[k];
        row.push(format!("{}", rec.grid.time(k)));
        for x in [rec.rho_gg[k], rec.rho_11[k], rec.rho_22[k], rec.rho_tt[k], z.re, z.im, z.norm()] {
            row.push(num(x));
        }
        row.push(rec.c[k].map_or_else(|| NA.to_string(), num));
        if let Some(e) = ens {
            for x in [e.stderr_re_rho12[k], e.stderr_im_rho12[k], e.stderr_rho12[k], e.mean_abs_rho12[k]] {
                row.push(num(x));
            }
        }
        if let Some(c) = per_realization_c {
            row.push(c[k].map_or_else(|| NA.to_string(), num));
        }
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| RunError::Metadata(e.to_string()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Path of the sidecar for a CSV: `run.csv` → `run.meta.json`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Runs `config` and writes the CSV and its sidecar.
pub fn run_scenario(config: &ScenarioConfig, csv_path: &Path) -> Result<RunOutcome, RunError> {
    let mut outcome = execute(config)?;
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(csv_path, &outcome.csv).map_err(io_err(csv_path))?;
    outcome.metadata.csv_file = csv_path.file_name().map(|n| n.to_string_lossy().into_owned());
    let meta_path = metadata_path(csv_path);
    let json = serde_json::to_string_pretty(&outcome.metadata).map_err(|e| RunError::Metadata(e.to_string()))?;
    fs::write(&meta_path, json + "\n").map_err(io_err(&meta_path))?;
    Ok(outcome)
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, RunError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_config(&text)?)
}

/// CSV location for a config file: `--out` if given, else `output.csv`
/// relative to the config, else the config path with a `.csv` extension.
pub fn csv_path_for(config_path: &Path, config: &ScenarioConfig, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    match &config.output.csv {
        Some(p) => config_path.parent().unwrap_or(Path::new("")).join(p),
        None => config_path.with_extension("csv"),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    pub csv_path: PathBuf,
    pub expected_sha256: String,
    pub actual_sha256: String,
    pub identical: bool,
}

/// Re-runs the config stored in a sidecar and compares the CSV it produces
/// with the recorded one, byte for byte.
pub fn replay(meta_path: &Path) -> Result<ReplayReport, RunError> {
    let text = fs::read_to_string(meta_path).map_err(io_err(meta_path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| RunError::Metadata(e.to_string()))?;
    let field = |key: &str| {
        value.get(key).and_then(|v| v.as_str()).map(str::to_owned).ok_or_else(|| RunError::Metadata(format!("missing {key}")))
    };
    let config = parse_config(&field("config")?)?;
    let csv_name = field("csv_file")?;
    let expected = field("csv_sha256")?;
    let csv_path = meta_path.parent().unwrap_or(Path::new("")).join(csv_name);
    let recorded = fs::read(&csv_path).map_err(io_err(&csv_path))?;
    let fresh = execute(&config)?;
    Ok(ReplayReport {
        identical: fresh.csv == recorded && sha256_hex(&recorded) == expected,
        csv_path,
        expected_sha256: expected,
        actual_sha256: sha256_hex(&fresh.csv),
    })
}
