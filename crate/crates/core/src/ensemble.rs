//! Monte-Carlo averaging over noisy-pulse realizations.
//!
//! Realization `k` uses the field seed `split_seed(base_seed, k)`. Realizations
//! are summed sequentially inside fixed blocks of [`BLOCK_SIZE`], and block
//! sums are combined by a pairwise tree keyed by block index, so the result is
//! bit-identical for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{build_rhs, run_trajectory_with, DynamicsError, IntegrationOptions, ScenarioRhs, TrajectoryRecord};
use crate::fields::{split_seed, FieldError, FieldSpec, NoiseSynthesizer, NoisyPulseSpec};
use crate::observables::coherence_fraction;
use crate::state::{new_ground_state, SystemParams, TimeGrid};
use crate::stats::{mean_and_stderr, PairwiseReducer};

type C64 = num_complex::Complex64;

pub const BLOCK_SIZE: usize = 32;

/// Default ensemble size for figure reproduction.
pub const DEFAULT_REALIZATIONS: usize = 2000;

/// Where the coherence fraction is taken relative to the ensemble average.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasureOrder {
    /// `C(⟨ρ⟩)`: the normative construction.
    #[default]
    AverageThenMeasure,
    /// Additionally reports `⟨C(ρ)⟩` over realizations.
    MeasureThenAverage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_realizations: usize,
    pub base_seed: u64,
    pub params: SystemParams,
    pub field: NoisyPulseSpec,
    pub grid: TimeGrid,
    /// Target relative standard error of the peak `|⟨ρ12⟩|`.
    pub convergence_target: Option<f64>,
    #[serde(default)]
    pub measure: MeasureOrder,
    /// Overrides the split seeds; must have `n_realizations` entries.
    #[serde(default)]
    pub explicit_seeds: Option<Vec<u64>>,
}

impl EnsembleSpec {
    pub fn seed(&self, index: usize) -> u64 {
        match &self.explicit_seeds {
            Some(s) => s[index],
            None => split_seed(self.base_seed, index as u64),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("an ensemble needs at least two realizations, got {0}")]
    TooFew(usize),
    #[error("explicit seed list has {got} entries, expected {expected}")]
    SeedCount { expected: usize, got: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("realization {index} (seed {seed}) failed: {source}")]
    Realization {
        index: usize,
        seed: u64,
        #[source]
        source: DynamicsError,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EnsembleWarning {
    ConvergenceNotReached { achieved: f64, target: f64, recommended_n: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    /// Entrywise means, with `c` recomputed from the averaged matrix.
    pub mean_record: TrajectoryRecord,
    pub stderr_re_rho12: Vec<f64>,
    pub stderr_im_rho12: Vec<f64>,
    /// `sqrt(se_re² + se_im²)` of `⟨ρ12⟩`.
    pub stderr_rho12: Vec<f64>,
    /// `⟨|ρ12|⟩` over realizations.
    pub mean_abs_rho12: Vec<f64>,
    /// `⟨C(ρ)⟩` over realizations with a defined fraction; only for
    /// [`MeasureOrder::MeasureThenAverage`].
    pub per_realization_c: Option<Vec<Option<f64>>>,
    pub n_used: usize,
    pub seeds: Vec<u64>,
    pub warnings: Vec<EnsembleWarning>,
}

#[derive(Clone, Debug)]
struct Sums {
    n: usize,
    gg: Vec<f64>,
    e11: Vec<f64>,
    e22: Vec<f64>,
    tt: Vec<f64>,
    c12: Vec<C64>,
    c1g: Vec<C64>,
    c2g: Vec<C64>,
    re12_sq: Vec<f64>,
    im12_sq: Vec<f64>,
    abs12: Vec<f64>,
    c_sum: Vec<f64>,
    c_count: Vec<u64>,
}

impl Sums {
    fn new(len: usize) -> Self {
        Sums {
            n: 0,
            gg: vec![0.0; len],
            e11: vec![0.0; len],
            e22: vec![0.0; len],
            tt: vec![0.0; len],
            c12: vec![C64::new(0.0, 0.0); len],
            c1g: vec![C64::new(0.0, 0.0); len],
            c2g: vec![C64::new(0.0, 0.0); len],
            re12_sq: vec![0.0; len],
            im12_sq: vec![0.0; len],
            abs12: vec![0.0; len],
            c_sum: vec![0.0; len],
            c_count: vec![0; len],
        }
    }

    fn add_record(&mut self, r: &TrajectoryRecord) {
        for k in 0..self.gg.len() {
            self.gg[k] += r.rho_gg[k];
            self.e11[k] += r.rho_11[k];
            self.e22[k] += r.rho_22[k];
            self.tt[k] += r.rho_tt[k];
            let z = r.rho_12[k];
            self.c12[k] += z;
            self.c1g[k] += r.rho_1g[k];
            self.c2g[k] += r.rho_2g[k];
            self.re12_sq[k] += z.re * z.re;
            self.im12_sq[k] += z.im * z.im;
            self.abs12[k] += z.norm();
            if let Some(c) = r.c[k] {
                self.c_sum[k] += c;
                self.c_count[k] += 1;
            }
        }
        self.n += 1;
    }

    fn merge(&mut self, o: Sums) {
        fn add<T: Copy + std::ops::AddAssign>(a: &mut [T], b: &[T]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
        add(&mut self.gg, &o.gg);
        add(&mut self.e11, &o.e11);
        add(&mut self.e22, &o.e22);
        add(&mut self.tt, &o.tt);
        add(&mut self.c12, &o.c12);
        add(&mut self.c1g, &o.c1g);
        add(&mut self.c2g, &o.c2g);
        add(&mut self.re12_sq, &o.re12_sq);
        add(&mut self.im12_sq, &o.im12_sq);
        add(&mut self.abs12, &o.abs12);
        add(&mut self.c_sum, &o.c_sum);
        add(&mut self.c_count, &o.c_count);
        self.n += o.n;
    }
}

/// Shared, read-only context for integrating single realizations.
pub struct RealizationRunner {
    synth: NoiseSynthesizer,
    rhs: ScenarioRhs,
    digest: String,
}

impl RealizationRunner {
    pub fn new(params: &SystemParams, field: &NoisyPulseSpec, grid: &TimeGrid) -> Result<Self, EnsembleError> {
        Ok(RealizationRunner {
            synth: NoiseSynthesizer::new(field, grid)?,
            rhs: build_rhs(params)?,
            digest: FieldSpec::NoisyPulse(field.clone()).digest(None),
        })
    }

    pub fn run(&self, seed: u64, opts: &IntegrationOptions) -> Result<TrajectoryRecord, DynamicsError> {
        let field = self.synth.realize(seed);
        run_trajectory_with(&self.rhs, &field, &new_ground_state(), opts)
    }
}

/// Integrates `n_realizations` noisy-pulse trajectories and averages them.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleResult, EnsembleError> {
    let n = spec.n_realizations;
    if n < 2 {
        return Err(EnsembleError::TooFew(n));
    }
    if let Some(s) = &spec.explicit_seeds {
        if s.len() != n {
            return Err(EnsembleError::SeedCount { expected: n, got: s.len() });
        }
    }
    let runner = RealizationRunner::new(&spec.params, &spec.field, &spec.grid)?;
    let len = spec.grid.len();
    let opts = IntegrationOptions::default();

    let n_blocks = n.div_ceil(BLOCK_SIZE);
    let wave = (4 * rayon::current_num_threads()).max(1);
    let mut reducer = PairwiseReducer::default();
    let mut block = 0;
    while block < n_blocks {
        let upto = (block + wave).min(n_blocks);
        let sums: Vec<Sums> = (block..upto)
            .into_par_iter()
            .map(|b| {
                let mut s = Sums::new(len);
                for index in (b * BLOCK_SIZE)..((b + 1) * BLOCK_SIZE).min(n) {
                    let seed = spec.seed(index);
                    let rec = runner
                        .run(seed, &opts)
                        .map_err(|source| EnsembleError::Realization { index, seed, source })?;
                    s.add_record(&rec);
                }
                Ok(s)
            })
            .collect::<Result<_, EnsembleError>>()?;
        for s in sums {
            reducer.push(s, Sums::merge);
        }
        block = upto;
    }
    let total = reducer.finish(Sums::merge).expect("at least one block");
    let mut result = finish(spec, &runner.digest, total);
    if let Some(target) = spec.convergence_target {
        let report = convergence_report(&result, Some(target));
        if !report.converged {
            result.warnings.push(EnsembleWarning::ConvergenceNotReached {
                achieved: report.rel_stderr,
                target,
                recommended_n: report.recommended_n.unwrap_or(n),
            });
        }
    }
    Ok(result)
}

fn finish(spec: &EnsembleSpec, digest: &str, s: Sums) -> EnsembleResult {
    let n = s.n;
    let nf = n as f64;
    let len = s.gg.len();
    let mut mean = TrajectoryRecord::with_capacity(spec.grid, spec.params, format!("ensemble:{digest}"));
    let mut se_re = Vec::with_capacity(len);
    let mut se_im = Vec::with_capacity(len);
    for k in 0..len {
        let r11 = s.e11[k] / nf;
        let r22 = s.e22[k] / nf;
        let r12 = s.c12[k] / nf;
        mean.rho_gg.push(s.gg[k] / nf);
        mean.rho_11.push(r11);
        mean.rho_22.push(r22);
        mean.rho_tt.push(s.tt[k] / nf);
        mean.rho_12.push(r12);
        mean.rho_1g.push(s.c1g[k] / nf);
        mean.rho_2g.push(s.c2g[k] / nf);
        mean.c.push(coherence_fraction(r11, r22, r12));
        se_re.push(mean_and_stderr(s.c12[k].re, s.re12_sq[k], n).1);
        se_im.push(mean_and_stderr(s.c12[k].im, s.im12_sq[k], n).1);
    }
    let stderr = se_re.iter().zip(&se_im).map(|(a, b)| a.hypot(*b)).collect();
    let per_realization_c = match spec.measure {
        MeasureOrder::AverageThenMeasure => None,
        MeasureOrder::MeasureThenAverage => Some(
            s.c_sum
                .iter()
                .zip(&s.c_count)
                .map(|(sum, &cnt)| if cnt == 0 { None } else { Some(sum / cnt as f64) })
                .collect(),
        ),
    };
    EnsembleResult {
        mean_record: mean,
        stderr_re_rho12: se_re,
        stderr_im_rho12: se_im,
        stderr_rho12: stderr,
        mean_abs_rho12: s.abs12.iter().map(|x| x / nf).collect(),
        per_realization_c,
        n_used: n,
        seeds: (0..n).map(|k| spec.seed(k)).collect(),
        warnings: Vec::new(),
    }
}

/// Statistical convergence of an ensemble average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_used: usize,
    pub peak_abs_rho12: f64,
    pub peak_time: f64,
    /// Largest standard error of `⟨ρ12⟩` over the run.
    pub max_stderr: f64,
    /// `max_stderr / peak_abs_rho12`.
    pub rel_stderr: f64,
    pub target: Option<f64>,
    pub converged: bool,
    /// `(rel_stderr / target)²`, the 1/√N extrapolation.
    pub recommended_factor: Option<f64>,
    pub recommended_n: Option<usize>,
}

pub fn convergence_report(result: &EnsembleResult, target: Option<f64>) -> ConvergenceReport {
    let rec = &result.mean_record;
    let (peak_k, peak) = rec
        .rho_12
        .iter()
        .map(|z| z.norm())
        .enumerate()
        .fold((0, 0.0), |best, (k, v)| if v > best.1 { (k, v) } else { best });
    let max_stderr = result.stderr_rho12.iter().copied().fold(0.0, f64::max);
    let rel = if max_stderr == 0.0 {
        0.0
    } else if peak == 0.0 {
        f64::INFINITY
    } else {
        max_stderr / peak
    };
    let (converged, factor, rec_n) = match target {
        None => (true, None, None),
        Some(t) => {
            let factor = (rel / t).powi(2);
            let rec_n = (result.n_used as f64 * factor).ceil();
            let rec_n = if rec_n.is_finite() { rec_n as usize } else { usize::MAX };
            (rel <= t, Some(factor), Some(rec_n.max(result.n_used)))
        }
    };
    ConvergenceReport {
        n_used: result.n_used,
        peak_abs_rho12: peak,
        peak_time: rec.grid.time(peak_k),
        max_stderr,
        rel_stderr: rel,
        target,
        converged,
        recommended_factor: factor,
        recommended_n: rec_n,
    }
}
