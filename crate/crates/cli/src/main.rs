use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vtrap::config::{default_config, ScenarioKind};
use vtrap::figures::{reproduce_figure, Figure, FigureOverrides};
use vtrap::noise_check::{check_config, DEFAULT_REALIZATIONS};
use vtrap::run::{csv_path_for, load_config, metadata_path, replay, run_scenario, RunError, RunOutcome};
use vtrap::{render_config, EXIT_CONFIG, EXIT_FAILURE, EXIT_FLAGGED, EXIT_OK};

/// Environment variable overriding the worker thread count.
const THREADS_ENV: &str = "VTRAP_THREADS";

#[derive(Parser)]
#[command(name = "vtrap", version, about = "Open V-system dynamics with a trap level")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config and write its CSV and metadata sidecar.
    Run {
        config: PathBuf,
        /// CSV path; defaults to `output.csv` in the config or `<config>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the parameter sweep behind a figure.
    Reproduce {
        figure: Figure,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Override the ensemble size of noisy curves.
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// Compare sampled noise correlations with the analytic kernel.
    NoiseCheck {
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REALIZATIONS)]
        realizations: usize,
        /// Print the full per-pair report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Re-run the config stored in a sidecar and compare CSV bytes.
    Replay { metadata: PathBuf },
    /// Print the default config of a scenario.
    DefaultConfig {
        #[arg(value_parser = parse_kind)]
        scenario: ScenarioKind,
    },
}

fn parse_kind(s: &str) -> Result<ScenarioKind, String> {
    ScenarioKind::ALL
        .into_iter()
        .find(|k| k.to_string().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown scenario '{s}'"))
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| format!("{THREADS_ENV} must be a positive integer, got '{value}'"))?;
    if n == 0 {
        return Err(format!("{THREADS_ENV} must be a positive integer, got '{value}'"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn fail(e: &RunError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn report(outcome: &RunOutcome, csv: &Path) -> i32 {
    println!("wrote {} ({} rows)", csv.display(), outcome.metadata.csv_rows);
    println!("wrote {}", metadata_path(csv).display());
    if let Some(g) = &outcome.metadata.grid_guard {
        println!("grid guard: max population deviation {:e} (threshold {:e})", g.max_population_deviation, g.threshold);
    }
    if let Some(c) = &outcome.metadata.convergence {
        println!("ensemble: n = {}, relative stderr of peak |<rho12>| = {:e}", c.n_used, c.rel_stderr);
    }
    for flag in &outcome.metadata.flags {
        eprintln!("flag: {flag:?}");
    }
    if outcome.flagged() {
        EXIT_FLAGGED
    } else {
        EXIT_OK
    }
}

fn dispatch(cmd: Command) -> i32 {
    match cmd {
        Command::Run { config, out } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let csv = csv_path_for(&config, &cfg, out.as_deref());
            match run_scenario(&cfg, &csv) {
                Ok(o) => report(&o, &csv),
                Err(e) => fail(&e),
            }
        }
        Command::Reproduce { figure, out_dir, realizations, seed } => {
            let overrides = FigureOverrides { n_realizations: realizations, base_seed: seed };
            match reproduce_figure(figure, &out_dir, &overrides) {
                Ok(curves) => curves.iter().map(|c| report(&c.outcome, &c.csv_path)).max().unwrap_or(EXIT_OK),
                Err(e) => fail(&e),
            }
        }
        Command::Validate { config } => match load_config(&config) {
            Ok(c) => {
                let g = c.time_grid();
                println!("ok: {} on [{}, {}] fs, dt = {} fs, {} steps", c.scenario, g.t_start, g.t_end, g.dt, g.n_steps);
                EXIT_OK
            }
            Err(e) => fail(&e),
        },
        Command::NoiseCheck { config, realizations, json } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let report = match check_config(&cfg, realizations) {
                None => {
                    eprintln!("error: scenario {} has no noisy field", cfg.scenario);
                    return EXIT_CONFIG;
                }
                Some(Err(e)) => return fail(&RunError::Field(e)),
                Some(Ok(r)) => r,
            };
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("plain data"));
            } else {
                for p in &report.pairs {
                    println!("{:?} t1 = {} fs, t2 = {} fs, z = {:.2}", p.kind, p.t1_fs, p.t2_fs, p.z);
                }
            }
            println!(
                "{}: {} pairs over {} realizations, max z = {:.2} (threshold {})",
                if report.passed { "pass" } else { "FAIL" },
                report.pairs.len(),
                report.n_realizations,
                report.max_z,
                report.threshold
            );
            if report.passed {
                EXIT_OK
            } else {
                EXIT_FLAGGED
            }
        }
        Command::Replay { metadata } => match replay(&metadata) {
            Ok(r) if r.identical => {
                println!("identical: {} ({})", r.csv_path.display(), r.actual_sha256);
                EXIT_OK
            }
            Ok(r) => {
                eprintln!("mismatch: {} recorded {}, replay {}", r.csv_path.display(), r.expected_sha256, r.actual_sha256);
                EXIT_FAILURE
            }
            Err(e) => fail(&e),
        },
        Command::DefaultConfig { scenario } => {
            print!("{}", render_config(&default_config(scenario)));
            EXIT_OK
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    ExitCode::from(dispatch(cli.command) as u8)
}
