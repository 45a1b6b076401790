//! Parameter sweeps behind each reproduced figure.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{default_config, render_config, ScenarioConfig, ScenarioKind};
use crate::run::{run_scenario, RunError, RunOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    AppendixA,
}

impl Figure {
    pub const ALL: [Figure; 7] =
        [Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5, Figure::Fig6, Figure::Fig7, Figure::AppendixA];

    pub fn slug(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::AppendixA => "appendix-a",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownFigure(pub String);

impl fmt::Display for UnknownFigure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = Figure::ALL.iter().map(|f| f.slug()).collect();
        write!(f, "unknown figure '{}', expected one of {}", self.0, names.join(", "))
    }
}

impl std::error::Error for UnknownFigure {}

impl FromStr for Figure {
    type Err = UnknownFigure;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Figure::ALL
            .into_iter()
            .find(|f| f.slug().replace('-', "") == key)
            .ok_or_else(|| UnknownFigure(s.to_string()))
    }
}

/// Sink times swept for the coherent two-pulse figures, fs.
pub const SINK_SWEEP_FS: [f64; 4] = [20.0, 50.0, 140.0, 500.0];

/// Excited-state periods swept for the cw steady-state figures, fs.
pub const PERIOD_SWEEP_FS: [f64; 3] = [44.5, 89.0, 178.0];

/// One curve of a figure.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub config: ScenarioConfig,
}

fn fs_label(prefix: &str, x: f64) -> String {
    format!("{prefix}{}fs", x.to_string().replace('.', "p"))
}

fn curve(label: String, mut config: ScenarioConfig) -> Curve {
    config.output.grid_guard = true;
    config.output.csv = None;
    Curve { label, config }
}

/// The configs behind a figure, one per curve.
pub fn figure_curves(figure: Figure) -> Vec<Curve> {
    let period = |kind: ScenarioKind| default_config(kind).system.excited_period_fs;
    match figure {
        Figure::Fig2 | Figure::Fig3 => {
            let base = default_config(ScenarioKind::CoherentPulseTrap);
            let mut curves: Vec<Curve> = SINK_SWEEP_FS
                .iter()
                .map(|&s| curve(fs_label("sink", s), base.with_timescales(base.system.excited_period_fs, s)))
                .collect();
            curves.push(curve("notrap".into(), base.with_timescales(base.system.excited_period_fs, f64::INFINITY)));
            curves
        }
        Figure::Fig4 | Figure::Fig7 => {
            let base = default_config(ScenarioKind::CwGround);
            PERIOD_SWEEP_FS
                .iter()
                .map(|&p| curve(fs_label("tauc", p), base.with_timescales(p, base.system.sink_time_fs)))
                .collect()
        }
        Figure::Fig5 => {
            let base = default_config(ScenarioKind::NoisyPulseTrap);
            [period(ScenarioKind::NoisyPulseTrap), 2.0 * period(ScenarioKind::NoisyPulseTrap)]
                .iter()
                .map(|&p| curve(fs_label("tauc", p), base.with_timescales(p, base.system.sink_time_fs)))
                .collect()
        }
        Figure::Fig6 => vec![
            curve("trap".into(), default_config(ScenarioKind::NoisyPulseTrap)),
            curve("notrap".into(), default_config(ScenarioKind::NoisyPulseNoTrap)),
        ],
        Figure::AppendixA => {
            let base = default_config(ScenarioKind::CwTrap);
            SINK_SWEEP_FS[..3]
                .iter()
                .map(|&s| curve(fs_label("sink", s), base.with_timescales(base.system.excited_period_fs, s)))
                .collect()
        }
    }
}

/// Overrides applied to every curve of a reproduction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FigureOverrides {
    pub n_realizations: Option<usize>,
    pub base_seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct CurveOutput {
    pub label: String,
    pub csv_path: PathBuf,
    pub config_path: PathBuf,
    pub outcome: RunOutcome,
}

/// Runs every curve of `figure`, writing `<slug>_<label>.{csv,meta.json,toml}`
/// into `out_dir`.
pub fn reproduce_figure(
    figure: Figure,
    out_dir: &Path,
    overrides: &FigureOverrides,
) -> Result<Vec<CurveOutput>, RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;
    let curves: Vec<Curve> = figure_curves(figure)
        .into_iter()
        .map(|mut c| {
            if let Some(e) = c.config.ensemble.as_mut() {
                e.n_realizations = overrides.n_realizations.unwrap_or(e.n_realizations);
                e.base_seed = overrides.base_seed.unwrap_or(e.base_seed);
            }
            c
        })
        .collect();
    curves
        .into_par_iter()
        .map(|c| {
            let stem = format!("{}_{}", figure.slug(), c.label);
            let csv_path = out_dir.join(format!("{stem}.csv"));
            let config_path = out_dir.join(format!("{stem}.toml"));
            fs::write(&config_path, render_config(&c.config))
                .map_err(|source| RunError::Io { path: config_path.clone(), source })?;
            let outcome = run_scenario(&c.config, &csv_path)?;
            Ok(CurveOutput { label: c.label, csv_path, config_path, outcome })
        })
        .collect()
}
