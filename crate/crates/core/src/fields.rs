//! Drive envelopes: coherent Gaussian pulse trains, cw, and noisy pulses.
//!
//! All fields are complex envelopes in the frame rotating at the midpoint of
//! the two excited levels. A field value `ε` enters the dynamics as the Rabi
//! coupling `rabi_scale · ε`, so `amplitude = 1` reproduces `με0/ħ = rabi_scale`.
//!
//! Noisy pulses are an envelope times a stationary complex Gaussian process
//! `ξ(t)` with `⟨ξ(t')ξ*(t'')⟩ = exp(−(t''−t')²/(2τd²))`, generated by
//! spectral filtering of white noise on a zero-padded periodic grid.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::state::TimeGrid;
use crate::stats::{mean_and_stderr, NeumaierSum};

type C64 = Complex64;

/// `τd` at or above this value is treated as the fully correlated limit.
pub const FULLY_CORRELATED_TAU_D: f64 = 1e6;

/// Pulse-train coverage: the grid must extend this many `τp` past the outer
/// pulse centres.
pub const COVERAGE_WIDTHS: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("grid step {dt} fs exceeds the resolution limit {limit} fs ({what})")]
    GridTooCoarse { dt: f64, limit: f64, what: &'static str },
    #[error("grid [{t_start}, {t_end}] does not cover the required span [{need_start}, {need_end}]")]
    GridTooShort {
        t_start: f64,
        t_end: f64,
        need_start: f64,
        need_end: f64,
    },
    #[error("invalid field spec: {0}")]
    InvalidSpec(String),
    #[error("time {t} fs lies outside the field grid [{t_start}, {t_end}]")]
    OutOfGrid { t: f64, t_start: f64, t_end: f64 },
    #[error("realizations are not sampled on identical grids")]
    GridMismatch,
    #[error("at least two realizations are required, got {0}")]
    EmptyEnsemble(usize),
    #[error("sample index {index} out of range for a grid of {len} points")]
    PairOutOfRange { index: usize, len: usize },
}

/// Train of Gaussian pulses `ε0 Σ_j exp(−(t − t_j)²/τp²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseTrainSpec {
    pub amplitude: f64,
    pub tau_p: f64,
    pub centers: Vec<f64>,
}

/// Constant-amplitude drive, optionally detuned from the level midpoint.
///
/// The envelope is `ε0 exp(−i δ t)`. With the coupling convention used by the
/// dynamics this is equivalent to `carrier_detuning = −δ` with a constant
/// envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CwSpec {
    pub amplitude: f64,
    pub detuning_from_midpoint: f64,
}

/// Whether the pulses of a noisy train share one stationary process.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseSharing {
    /// One process `ξ(t)` across the whole grid, multiplied by the summed envelope.
    #[default]
    Shared,
    /// An independent process per pulse.
    Independent,
}

/// Noisy Gaussian pulses obeying a Gaussian two-time correlation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyPulseSpec {
    pub amplitude: f64,
    pub tau_p: f64,
    /// Decorrelation time of the stationary process.
    pub tau_d: f64,
    pub centers: Vec<f64>,
    /// `ω0` relative to the midpoint frame; applied as `exp(−i ω0 t)`.
    pub carrier_offset: f64,
    #[serde(default)]
    pub sharing: NoiseSharing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FieldSpec {
    PulseTrain(PulseTrainSpec),
    Cw(CwSpec),
    NoisyPulse(NoisyPulseSpec),
}

impl FieldSpec {
    /// Largest grid spacing the field accepts (infinite for cw).
    pub fn resolution_limit(&self) -> f64 {
        match self {
            FieldSpec::PulseTrain(s) => s.tau_p / 50.0,
            FieldSpec::Cw(_) => f64::INFINITY,
            FieldSpec::NoisyPulse(s) if s.tau_d >= FULLY_CORRELATED_TAU_D => s.tau_p / 50.0,
            FieldSpec::NoisyPulse(s) => (s.tau_p / 50.0).min(s.tau_d / 20.0),
        }
    }

    /// Short stable fingerprint of the spec, for run metadata.
    pub fn digest(&self, seed: Option<u64>) -> String {
        let mut h = Sha256::new();
        h.update(format!("{self:?}|{seed:?}").as_bytes());
        hex_prefix(&h.finalize())
    }
}

fn hex_prefix(bytes: &[u8]) -> String {
    bytes.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// A deterministic field that can be evaluated exactly between grid points.
#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticField {
    PulseTrain(PulseTrainSpec),
    Cw(CwSpec),
}

impl AnalyticField {
    pub fn value(&self, t: f64) -> C64 {
        match self {
            AnalyticField::PulseTrain(s) => C64::new(s.amplitude * envelope(&s.centers, s.tau_p, t), 0.0),
            AnalyticField::Cw(s) => {
                C64::from_polar(s.amplitude, -s.detuning_from_midpoint * t)
            }
        }
    }
}

/// `Σ_j exp(−(t − t_j)²/τp²)`.
pub fn envelope(centers: &[f64], tau_p: f64, t: f64) -> f64 {
    centers
        .iter()
        .map(|&c| {
            let x = (t - c) / tau_p;
            (-x * x).exp()
        })
        .sum()
}

/// Drive envelope tabulated on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    pub grid: TimeGrid,
    pub values: Vec<C64>,
    /// Present for stochastic realizations.
    pub seed: Option<u64>,
    analytic: Option<AnalyticField>,
    digest: String,
}

impl SampledField {
    /// Wraps tabulated values; off-grid evaluation uses cubic interpolation.
    pub fn from_values(grid: TimeGrid, values: Vec<C64>, seed: Option<u64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::InvalidSpec(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        let mut h = Sha256::new();
        for z in &values {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
        let digest = format!("tabulated:{}", hex_prefix(&h.finalize()));
        Ok(SampledField {
            grid,
            values,
            seed,
            analytic: None,
            digest,
        })
    }

    fn from_analytic(grid: TimeGrid, field: AnalyticField) -> Self {
        let values = grid.times().map(|t| field.value(t)).collect();
        let spec = match &field {
            AnalyticField::PulseTrain(s) => FieldSpec::PulseTrain(s.clone()),
            AnalyticField::Cw(s) => FieldSpec::Cw(s.clone()),
        };
        SampledField {
            grid,
            values,
            seed: None,
            analytic: Some(field),
            digest: spec.digest(None),
        }
    }

    /// Fingerprint of the spec (and seed) this field was generated from.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn is_analytic(&self) -> bool {
        self.analytic.is_some()
    }

    /// Field at time `t`: exact for deterministic fields, otherwise the grid
    /// sample or a four-point Lagrange interpolation between samples.
    pub fn eval(&self, t: f64) -> Result<C64, FieldError> {
        let g = &self.grid;
        if !g.contains(t) {
            return Err(FieldError::OutOfGrid {
                t,
                t_start: g.t_start,
                t_end: g.t_end,
            });
        }
        if let Some(a) = &self.analytic {
            return Ok(a.value(t));
        }
        let x = (t - g.t_start) / g.dt;
        let k = x.round();
        if (x - k).abs() < 1e-9 {
            return Ok(self.values[(k.max(0.0) as usize).min(g.n_steps)]);
        }
        Ok(self.interpolate(x))
    }

    fn interpolate(&self, x: f64) -> C64 {
        let n = self.values.len();
        if n < 4 {
            let k = (x.floor().max(0.0) as usize).min(n - 2);
            let u = x - k as f64;
            return self.values[k] * (1.0 - u) + self.values[k + 1] * u;
        }
        let k = x.floor() as isize;
        let base = (k - 1).clamp(0, n as isize - 4) as usize;
        let u = x - base as f64;
        let w = [
            -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0,
            u * (u - 2.0) * (u - 3.0) / 2.0,
            -u * (u - 1.0) * (u - 3.0) / 2.0,
            u * (u - 1.0) * (u - 2.0) / 6.0,
        ];
        (0..4).map(|i| self.values[base + i] * w[i]).sum()
    }

    /// Zero drive on `grid`.
    pub fn zero(grid: TimeGrid) -> Self {
        Self::from_analytic(
            grid,
            AnalyticField::Cw(CwSpec {
                amplitude: 0.0,
                detuning_from_midpoint: 0.0,
            }),
        )
    }
}

fn check_pulses(tau_p: f64, centers: &[f64], amplitude: f64) -> Result<(), FieldError> {
    if !(tau_p.is_finite() && tau_p > 0.0) {
        return Err(FieldError::InvalidSpec(format!("tau_p must be positive, got {tau_p}")));
    }
    if centers.is_empty() {
        return Err(FieldError::InvalidSpec("at least one pulse centre is required".into()));
    }
    if centers.iter().any(|c| !c.is_finite()) || centers.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FieldError::InvalidSpec("pulse centres must be finite and strictly increasing".into()));
    }
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(FieldError::InvalidSpec(format!("amplitude must be non-negative, got {amplitude}")));
    }
    Ok(())
}

fn check_resolution(grid: &TimeGrid, limit: f64, what: &'static str) -> Result<(), FieldError> {
    if grid.dt > limit * (1.0 + 1e-12) {
        Err(FieldError::GridTooCoarse {
            dt: grid.dt,
            limit,
            what,
        })
    } else {
        Ok(())
    }
}

/// Samples a coherent Gaussian pulse train on `grid`.
pub fn eval_pulse_train(spec: &PulseTrainSpec, grid: &TimeGrid) -> Result<SampledField, FieldError> {
    check_pulses(spec.tau_p, &spec.centers, spec.amplitude)?;
    check_resolution(grid, spec.tau_p / 50.0, "tau_p / 50")?;
    let need_start = spec.centers[0] - COVERAGE_WIDTHS * spec.tau_p;
    let need_end = spec.centers[spec.centers.len() - 1] + COVERAGE_WIDTHS * spec.tau_p;
    if grid.t_start > need_start || grid.t_end < need_end {
        return Err(FieldError::GridTooShort {
            t_start: grid.t_start,
            t_end: grid.t_end,
            need_start,
            need_end,
        });
    }
    Ok(SampledField::from_analytic(*grid, AnalyticField::PulseTrain(spec.clone())))
}

/// Samples a cw drive on `grid`.
pub fn eval_cw(spec: &CwSpec, grid: &TimeGrid) -> Result<SampledField, FieldError> {
    if !(spec.amplitude.is_finite() && spec.amplitude >= 0.0) || !spec.detuning_from_midpoint.is_finite() {
        return Err(FieldError::InvalidSpec("cw amplitude and detuning must be finite".into()));
    }
    Ok(SampledField::from_analytic(*grid, AnalyticField::Cw(spec.clone())))
}

/// Draws one noisy-pulse realization. Same `(spec, grid, seed)`, same bits.
pub fn synthesize_noisy_pulse(spec: &NoisyPulseSpec, grid: &TimeGrid, seed: u64) -> Result<SampledField, FieldError> {
    Ok(NoiseSynthesizer::new(spec, grid)?.realize(seed))
}

/// ChaCha8 stream used for the realization with the given seed.
pub fn realization_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of realization `index` in an ensemble rooted at `base_seed`.
///
/// SplitMix64 finalizer applied to `base_seed + (index + 1)·φ64`, i.e. the
/// `index`-th output of a SplitMix64 stream started at `base_seed`.
pub fn split_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn standard_complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Precomputed filter and envelope for repeated noisy-pulse realizations on a
/// fixed grid.
#[derive(Clone)]
pub struct NoiseSynthesizer {
    spec: NoisyPulseSpec,
    grid: TimeGrid,
    /// `ε0 · exp(−iω0 t_k)` times each pulse's envelope at `t_k`.
    envelopes: Vec<Vec<C64>>,
    filter: Option<SpectralFilter>,
}

#[derive(Clone)]
struct SpectralFilter {
    /// `sqrt(S_m / M)` per frequency bin.
    weights: Vec<f64>,
    ifft: Arc<dyn Fft<f64>>,
}

impl SpectralFilter {
    /// Filter whose output has autocorrelation `exp(−(n dt)²/(2τd²))` on a
    /// periodic grid of `m` points.
    fn new(m: usize, dt: f64, tau_d: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let ifft = planner.plan_fft_inverse(m);
        let mut kernel: Vec<C64> = (0..m)
            .map(|j| {
                let lag = j.min(m - j) as f64 * dt;
                C64::new((-(lag * lag) / (2.0 * tau_d * tau_d)).exp(), 0.0)
            })
            .collect();
        fwd.process(&mut kernel);
        let weights = kernel
            .iter()
            .map(|s| (s.re.max(0.0) / m as f64).sqrt())
            .collect();
        SpectralFilter { weights, ifft }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        let mut buf: Vec<C64> = self
            .weights
            .iter()
            .map(|&w| standard_complex_normal(rng) * w)
            .collect();
        self.ifft.process(&mut buf);
        buf.truncate(n);
        buf
    }
}

impl NoiseSynthesizer {
    pub fn new(spec: &NoisyPulseSpec, grid: &TimeGrid) -> Result<Self, FieldError> {
        check_pulses(spec.tau_p, &spec.centers, spec.amplitude)?;
        if !(spec.tau_d > 0.0) || spec.tau_d.is_nan() {
            return Err(FieldError::InvalidSpec(format!("tau_d must be positive, got {}", spec.tau_d)));
        }
        if !spec.carrier_offset.is_finite() {
            return Err(FieldError::InvalidSpec("carrier_offset must be finite".into()));
        }
        check_resolution(grid, spec.tau_p / 50.0, "tau_p / 50")?;
        let correlated = spec.tau_d >= FULLY_CORRELATED_TAU_D;
        if !correlated {
            check_resolution(grid, spec.tau_d / 20.0, "tau_d / 20")?;
        }

        let carrier = |t: f64| {
            if spec.carrier_offset == 0.0 {
                C64::new(1.0, 0.0)
            } else {
                C64::from_polar(1.0, -spec.carrier_offset * t)
            }
        };
        let per_pulse = |centers: &[f64]| -> Vec<C64> {
            grid.times()
                .map(|t| carrier(t) * (spec.amplitude * envelope(centers, spec.tau_p, t)))
                .collect()
        };
        let envelopes = match spec.sharing {
            NoiseSharing::Shared => vec![per_pulse(&spec.centers)],
            NoiseSharing::Independent => spec.centers.iter().map(|c| per_pulse(std::slice::from_ref(c))).collect(),
        };

        let filter = if correlated {
            None
        } else {
            // padding of 10 τd keeps wrap-around correlations below exp(−50)
            let pad = (10.0 * spec.tau_d / grid.dt).ceil() as usize;
            let m = (grid.len() + pad).next_power_of_two();
            Some(SpectralFilter::new(m, grid.dt, spec.tau_d))
        };

        Ok(NoiseSynthesizer {
            spec: spec.clone(),
            grid: *grid,
            envelopes,
            filter,
        })
    }

    pub fn spec(&self) -> &NoisyPulseSpec {
        &self.spec
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Unit-variance stationary process samples, one vector per noise source.
    fn draw_processes(&self, seed: u64) -> Vec<Vec<C64>> {
        let mut rng = realization_rng(seed);
        let n = self.grid.len();
        self.envelopes
            .iter()
            .map(|_| match &self.filter {
                Some(f) => f.draw(&mut rng, n),
                None => vec![standard_complex_normal(&mut rng); n],
            })
            .collect()
    }

    pub fn realize(&self, seed: u64) -> SampledField {
        let processes = self.draw_processes(seed);
        let n = self.grid.len();
        let mut values = vec![C64::new(0.0, 0.0); n];
        for (env, xi) in self.envelopes.iter().zip(&processes) {
            for k in 0..n {
                values[k] += env[k] * xi[k];
            }
        }
        SampledField {
            grid: self.grid,
            values,
            seed: Some(seed),
            analytic: None,
            digest: FieldSpec::NoisyPulse(self.spec.clone()).digest(Some(seed)),
        }
    }

    /// Analytic `⟨ε(t_k) ε*(t_l)⟩` for this spec.
    pub fn expected_correlation(&self, k: usize, l: usize) -> C64 {
        expected_correlation(&self.spec, &self.grid, k, l)
    }

    /// Streaming version of [`estimate_two_time_correlation`] over the
    /// realizations `split_seed(base_seed, 0..n)`, without keeping them.
    pub fn estimate_correlation(
        &self,
        base_seed: u64,
        n: usize,
        pairs: &[(usize, usize)],
    ) -> Result<Vec<CorrelationEstimate>, FieldError> {
        let n_chunks = n.div_ceil(ESTIMATOR_CHUNK);
        let partials: Vec<CorrelationAccumulator> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = CorrelationAccumulator::new(self.grid, pairs)?;
                for k in (c * ESTIMATOR_CHUNK)..((c + 1) * ESTIMATOR_CHUNK).min(n) {
                    acc.push(&self.realize(split_seed(base_seed, k as u64)))?;
                }
                Ok(acc)
            })
            .collect::<Result<_, FieldError>>()?;
        let mut total = CorrelationAccumulator::new(self.grid, pairs)?;
        for p in &partials {
            total.merge(p)?;
        }
        total.finish()
    }
}

/// Target two-time correlation `⟨ε(t_k) ε*(t_l)⟩`:
/// `ε0² A(t_k) A(t_l) exp(iω0(t_l − t_k)) exp(−(t_l − t_k)²/(2τd²))`, with
/// `A` the summed envelope for shared noise (per-pulse sum of products for
/// independent noise).
pub fn expected_correlation(spec: &NoisyPulseSpec, grid: &TimeGrid, k: usize, l: usize) -> C64 {
    let (t1, t2) = (grid.time(k), grid.time(l));
    let lag = t2 - t1;
    let kernel = if spec.tau_d >= FULLY_CORRELATED_TAU_D {
        1.0
    } else {
        (-(lag * lag) / (2.0 * spec.tau_d * spec.tau_d)).exp()
    };
    let env_product = match spec.sharing {
        NoiseSharing::Shared => envelope(&spec.centers, spec.tau_p, t1) * envelope(&spec.centers, spec.tau_p, t2),
        NoiseSharing::Independent => spec
            .centers
            .iter()
            .map(|c| envelope(std::slice::from_ref(c), spec.tau_p, t1) * envelope(std::slice::from_ref(c), spec.tau_p, t2))
            .sum(),
    };
    C64::from_polar(spec.amplitude * spec.amplitude * env_product * kernel, spec.carrier_offset * lag)
}

/// Sample estimate of `⟨ε(t_k) ε*(t_l)⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationEstimate {
    pub pair: (usize, usize),
    pub mean: C64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n: usize,
}

impl CorrelationEstimate {
    /// Standard error of the complex mean, `sqrt(se_re² + se_im²)`.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }

    /// `|mean − target|` in units of the standard error. A zero standard
    /// error yields 0 on an exact match and infinity otherwise.
    pub fn z_score(&self, target: C64) -> f64 {
        let d = (self.mean - target).norm();
        let se = self.stderr();
        if se > 0.0 {
            d / se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, Default)]
struct PairSums {
    re: NeumaierSum,
    im: NeumaierSum,
    re_sq: NeumaierSum,
    im_sq: NeumaierSum,
}

/// Streaming, mergeable accumulator behind [`estimate_two_time_correlation`].
#[derive(Clone, Debug)]
pub struct CorrelationAccumulator {
    grid: TimeGrid,
    pairs: Vec<(usize, usize)>,
    sums: Vec<PairSums>,
    n: usize,
}

impl CorrelationAccumulator {
    pub fn new(grid: TimeGrid, pairs: &[(usize, usize)]) -> Result<Self, FieldError> {
        let len = grid.len();
        for &(k, l) in pairs {
            for index in [k, l] {
                if index >= len {
                    return Err(FieldError::PairOutOfRange { index, len });
                }
            }
        }
        Ok(CorrelationAccumulator {
            grid,
            pairs: pairs.to_vec(),
            sums: vec![PairSums::default(); pairs.len()],
            n: 0,
        })
    }

    pub fn push(&mut self, field: &SampledField) -> Result<(), FieldError> {
        if field.grid != self.grid {
            return Err(FieldError::GridMismatch);
        }
        for (s, &(k, l)) in self.sums.iter_mut().zip(&self.pairs) {
            let z = field.values[k] * field.values[l].conj();
            s.re.add(z.re);
            s.im.add(z.im);
            s.re_sq.add(z.re * z.re);
            s.im_sq.add(z.im * z.im);
        }
        self.n += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &CorrelationAccumulator) -> Result<(), FieldError> {
        if other.grid != self.grid || other.pairs != self.pairs {
            return Err(FieldError::GridMismatch);
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.re.merge(&b.re);
            a.im.merge(&b.im);
            a.re_sq.merge(&b.re_sq);
            a.im_sq.merge(&b.im_sq);
        }
        self.n += other.n;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn finish(&self) -> Result<Vec<CorrelationEstimate>, FieldError> {
        if self.n < 2 {
            return Err(FieldError::EmptyEnsemble(self.n));
        }
        Ok(self
            .sums
            .iter()
            .zip(&self.pairs)
            .map(|(s, &pair)| {
                let (re, se_re) = mean_and_stderr(s.re.value(), s.re_sq.value(), self.n);
                let (im, se_im) = mean_and_stderr(s.im.value(), s.im_sq.value(), self.n);
                CorrelationEstimate {
                    pair,
                    mean: C64::new(re, im),
                    stderr_re: se_re,
                    stderr_im: se_im,
                    n: self.n,
                }
            })
            .collect())
    }
}

const ESTIMATOR_CHUNK: usize = 256;

/// Sample mean and standard error of `ε(t_k) ε*(t_l)` across realizations.
///
/// Realizations are reduced in fixed chunks of 256 merged in index order, so
/// the result does not depend on the thread count.
pub fn estimate_two_time_correlation(
    realizations: &[SampledField],
    pairs: &[(usize, usize)],
) -> Result<Vec<CorrelationEstimate>, FieldError> {
    if realizations.len() < 2 {
        return Err(FieldError::EmptyEnsemble(realizations.len()));
    }
    let grid = realizations[0].grid;
    let partials: Vec<CorrelationAccumulator> = realizations
        .par_chunks(ESTIMATOR_CHUNK)
        .map(|chunk| {
            let mut acc = CorrelationAccumulator::new(grid, pairs)?;
            for f in chunk {
                acc.push(f)?;
            }
            Ok(acc)
        })
        .collect::<Result<_, FieldError>>()?;
    let mut total = CorrelationAccumulator::new(grid, pairs)?;
    for p in &partials {
        total.merge(p)?;
    }
    total.finish()
}
