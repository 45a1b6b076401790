//! Statistical check of the synthesized noise against its target correlation.

use serde::Serialize;
use vtrap_core::{FieldError, FieldSpec, NoiseSynthesizer, NoisyPulseSpec, TimeGrid, C64};

use crate::config::ScenarioConfig;

pub const DEFAULT_REALIZATIONS: usize = 10_000;
pub const DEFAULT_MAX_Z: f64 = 4.0;

/// Seed root for the check, kept apart from ensemble seeds.
pub const CHECK_SEED: u64 = 0x006e_6f69_7365;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PairKind {
    Diagonal,
    IntraPulse,
    CrossPulse,
}

/// Probe pairs `(k, l)` of grid indices: variances across each pulse,
/// short lags inside each pulse, and pairs straddling two pulses.
pub fn probe_pairs(spec: &NoisyPulseSpec, grid: &TimeGrid) -> Vec<(PairKind, usize, usize)> {
    let inside = |t: f64| t >= grid.t_start && t <= grid.t_end;
    let mut out = Vec::new();
    let mut push = |kind, t1: f64, t2: f64| {
        if inside(t1) && inside(t2) {
            out.push((kind, grid.nearest_index(t1), grid.nearest_index(t2)));
        }
    };
    let tp = spec.tau_p;
    for &c in &spec.centers {
        for f in [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5] {
            push(PairKind::Diagonal, c + f * tp, c + f * tp);
        }
        for off in [-0.5, 0.0, 0.5] {
            for lag in [0.5, 1.0, 1.5, 2.0, 3.0] {
                let t = c + off * tp;
                push(PairKind::IntraPulse, t, t + lag * spec.tau_d);
            }
        }
    }
    for w in spec.centers.windows(2) {
        for a in [-0.5, 0.0, 0.5] {
            for b in [-0.5, 0.0, 0.5] {
                push(PairKind::CrossPulse, w[0] + a * tp, w[1] + b * tp);
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PairCheck {
    pub kind: PairKind,
    pub t1_fs: f64,
    pub t2_fs: f64,
    pub expected_re: f64,
    pub expected_im: f64,
    pub mean_re: f64,
    pub mean_im: f64,
    pub stderr: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoiseCheckReport {
    pub n_realizations: usize,
    pub max_z: f64,
    pub threshold: f64,
    pub passed: bool,
    pub pairs: Vec<PairCheck>,
}

impl NoiseCheckReport {
    pub fn count(&self, kind: PairKind) -> usize {
        self.pairs.iter().filter(|p| p.kind == kind).count()
    }
}

pub fn check_noise(
    spec: &NoisyPulseSpec,
    grid: &TimeGrid,
    n: usize,
    base_seed: u64,
    threshold: f64,
) -> Result<NoiseCheckReport, FieldError> {
    let synth = NoiseSynthesizer::new(spec, grid)?;
    let probes = probe_pairs(spec, grid);
    let pairs: Vec<(usize, usize)> = probes.iter().map(|&(_, k, l)| (k, l)).collect();
    let estimates = synth.estimate_correlation(base_seed, n, &pairs)?;
    let checks: Vec<PairCheck> = probes
        .iter()
        .zip(&estimates)
        .map(|(&(kind, k, l), e)| {
            let target: C64 = synth.expected_correlation(k, l);
            PairCheck {
                kind,
                t1_fs: grid.time(k),
                t2_fs: grid.time(l),
                expected_re: target.re,
                expected_im: target.im,
                mean_re: e.mean.re,
                mean_im: e.mean.im,
                stderr: e.stderr(),
                z: e.z_score(target),
            }
        })
        .collect();
    let max_z = checks.iter().map(|c| c.z).fold(0.0, f64::max);
    Ok(NoiseCheckReport { n_realizations: n, max_z, threshold, passed: max_z <= threshold, pairs: checks })
}

/// Runs the check on the field and grid of a noisy scenario config.
pub fn check_config(config: &ScenarioConfig, n: usize) -> Option<Result<NoiseCheckReport, FieldError>> {
    match &config.field {
        FieldSpec::NoisyPulse(spec) => Some(check_noise(spec, &config.time_grid(), n, CHECK_SEED, DEFAULT_MAX_Z)),
        _ => None,
    }
}
