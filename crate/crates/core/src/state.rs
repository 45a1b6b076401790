//! Density-matrix state, system parameters, the time grid, and the validity
//! checks every integrator step is held to.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units;

pub type C64 = Complex64;

/// Hilbert-space dimension of the embedding: ground, two excited levels, trap.
pub const DIM: usize = 4;

pub const GROUND: usize = 0;
pub const EXCITED_1: usize = 1;
pub const EXCITED_2: usize = 2;
pub const TRAP: usize = 3;

const ZERO: C64 = C64::new(0.0, 0.0);

/// 4×4 density matrix over the ordered basis `(g, 1, 2, trap)`.
///
/// In scenarios without a trap state the last row and column simply stay zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityState {
    elements: [[C64; DIM]; DIM],
}

/// `ρ(0) = |g⟩⟨g|`.
pub fn new_ground_state() -> DensityState {
    let mut elements = [[ZERO; DIM]; DIM];
    elements[GROUND][GROUND] = C64::new(1.0, 0.0);
    DensityState { elements }
}

impl Default for DensityState {
    fn default() -> Self {
        new_ground_state()
    }
}

impl DensityState {
    pub fn zeros() -> Self {
        DensityState {
            elements: [[ZERO; DIM]; DIM],
        }
    }

    /// Wraps a raw matrix without checking it; run [`validate`] if the source
    /// is untrusted.
    pub fn from_matrix(elements: [[C64; DIM]; DIM]) -> Self {
        DensityState { elements }
    }

    /// Pure state `|ψ⟩⟨ψ|`, normalising `ψ`.
    pub fn from_pure(psi: [C64; DIM]) -> Self {
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        let mut elements = [[ZERO; DIM]; DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                elements[i][j] = psi[i] * psi[j].conj() / norm;
            }
        }
        DensityState { elements }
    }

    /// Diagonal state with the given populations.
    pub fn from_populations(pops: [f64; DIM]) -> Self {
        let mut s = Self::zeros();
        for (i, p) in pops.iter().enumerate() {
            s.elements[i][i] = C64::new(*p, 0.0);
        }
        s
    }

    pub fn elements(&self) -> &[[C64; DIM]; DIM] {
        &self.elements
    }

    pub fn population(&self, level: usize) -> f64 {
        self.elements[level][level].re
    }

    pub fn rho_gg(&self) -> f64 {
        self.population(GROUND)
    }

    pub fn rho_11(&self) -> f64 {
        self.population(EXCITED_1)
    }

    pub fn rho_22(&self) -> f64 {
        self.population(EXCITED_2)
    }

    pub fn rho_tt(&self) -> f64 {
        self.population(TRAP)
    }

    /// Excited-state coherence `ρ12`.
    pub fn rho_12(&self) -> C64 {
        self.elements[EXCITED_1][EXCITED_2]
    }

    pub fn rho_1g(&self) -> C64 {
        self.elements[EXCITED_1][GROUND]
    }

    pub fn rho_2g(&self) -> C64 {
        self.elements[EXCITED_2][GROUND]
    }

    pub fn trace(&self) -> C64 {
        (0..DIM).map(|i| self.elements[i][i]).sum()
    }

    /// `max_ij |ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..DIM {
            for j in i..DIM {
                let d = (self.elements[i][j] - self.elements[j][i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `ρ ← (ρ + ρ†)/2`. Idempotent bit-for-bit on an exactly Hermitian matrix.
    pub fn rehermitize(&mut self) {
        for i in 0..DIM {
            self.elements[i][i].im = 0.0;
            for j in (i + 1)..DIM {
                let avg = (self.elements[i][j] + self.elements[j][i].conj()) * 0.5;
                self.elements[i][j] = avg;
                self.elements[j][i] = avg.conj();
            }
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &DensityState) {
        for i in 0..DIM {
            for j in 0..DIM {
                self.elements[i][j] += other.elements[i][j] * alpha;
            }
        }
    }

    /// `self + alpha * other`.
    pub fn plus_scaled(&self, alpha: f64, other: &DensityState) -> DensityState {
        let mut out = *self;
        out.add_scaled(alpha, other);
        out
    }

    pub fn max_abs_diff(&self, other: &DensityState) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..DIM {
            for j in 0..DIM {
                worst = worst.max((self.elements[i][j] - other.elements[i][j]).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.elements
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Smallest eigenvalue of the Hermitian part `(ρ + ρ†)/2`.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.elements)[0]
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; DIM] {
        hermitian_eigenvalues(&self.elements)
    }

    /// True when `ρ + shift·I` admits a Cholesky factorisation, i.e. every
    /// eigenvalue of the Hermitian part exceeds `-shift`.
    fn shifted_cholesky_ok(&self, shift: f64) -> bool {
        let mut a = self.elements;
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += shift;
        }
        let mut l = [[ZERO; DIM]; DIM];
        for j in 0..DIM {
            let mut d = a[j][j].re;
            for k in 0..j {
                d -= l[j][k].norm_sqr();
            }
            if !(d > 0.0) {
                return false;
            }
            let djj = d.sqrt();
            l[j][j] = C64::new(djj, 0.0);
            for i in (j + 1)..DIM {
                let mut s = (a[i][j] + a[j][i].conj()) * 0.5;
                for k in 0..j {
                    s -= l[i][k] * l[j][k].conj();
                }
                l[i][j] = s / djj;
            }
        }
        true
    }
}

impl Index<(usize, usize)> for DensityState {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.elements[i][j]
    }
}

impl IndexMut<(usize, usize)> for DensityState {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.elements[i][j]
    }
}

/// Eigenvalues (ascending) of the Hermitian part of a 4×4 complex matrix.
///
/// `H = A + iB` is embedded as the real symmetric `[[A, -B], [B, A]]`, whose
/// spectrum is that of `H` with every eigenvalue doubled; cyclic Jacobi
/// rotations then diagonalise the 8×8 block to machine precision.
fn hermitian_eigenvalues(m: &[[C64; DIM]; DIM]) -> [f64; DIM] {
    const N: usize = 2 * DIM;
    let mut a = [[0.0f64; N]; N];
    for i in 0..DIM {
        for j in 0..DIM {
            let h = (m[i][j] + m[j][i].conj()) * 0.5;
            a[i][j] = h.re;
            a[i + DIM][j + DIM] = h.re;
            a[i][j + DIM] = -h.im;
            a[i + DIM][j] = h.im;
        }
    }

    for _sweep in 0..64 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..N {
            diag += a[i][i] * a[i][i];
            for j in (i + 1)..N {
                off += a[i][j] * a[i][j];
            }
        }
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }

    let mut evs: Vec<f64> = (0..N).map(|i| a[i][i]).collect();
    evs.sort_by(|x, y| x.total_cmp(y));
    // each eigenvalue appears twice in the real embedding
    [evs[0], evs[2], evs[4], evs[6]]
}

/// Thresholds for [`validate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityTolerances {
    pub trace: f64,
    pub hermiticity: f64,
    pub positivity: f64,
    pub population: f64,
}

impl Default for ValidityTolerances {
    fn default() -> Self {
        ValidityTolerances {
            trace: 1e-9,
            hermiticity: 1e-10,
            positivity: 1e-8,
            population: 1e-8,
        }
    }
}

/// One failed invariant together with its magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// `|Tr ρ − 1|`.
    Trace(f64),
    /// `max |ρ_ij − conj(ρ_ji)|`.
    Hermiticity(f64),
    /// Smallest eigenvalue.
    Positivity(f64),
    Population { level: usize, value: f64 },
    NonFinite,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Trace(d) => write!(f, "trace deviates from 1 by {d:e}"),
            Violation::Hermiticity(d) => write!(f, "hermiticity defect {d:e}"),
            Violation::Positivity(e) => write!(f, "smallest eigenvalue {e:e}"),
            Violation::Population { level, value } => {
                write!(f, "population of level {level} is {value:e}")
            }
            Violation::NonFinite => write!(f, "non-finite matrix element"),
        }
    }
}

/// Checks every [`DensityState`] invariant. Returns an empty list when all hold.
///
/// Positivity is only assessed once the matrix is Hermitian within tolerance;
/// the spectrum of a non-Hermitian matrix says nothing useful about the state.
pub fn validate(state: &DensityState, tol: &ValidityTolerances) -> Vec<Violation> {
    if !state.is_finite() {
        return vec![Violation::NonFinite];
    }
    let mut out = Vec::new();

    let trace_dev = (state.trace() - C64::new(1.0, 0.0)).norm();
    if trace_dev > tol.trace {
        out.push(Violation::Trace(trace_dev));
    }

    let herm = state.hermiticity_defect();
    if herm > tol.hermiticity {
        out.push(Violation::Hermiticity(herm));
    }

    for level in 0..DIM {
        let p = state.population(level);
        if p < -tol.population || p > 1.0 + tol.population {
            out.push(Violation::Population { level, value: p });
        }
    }

    if herm <= tol.hermiticity && !state.shifted_cholesky_ok(tol.positivity) {
        let min_eig = state.min_eigenvalue();
        if min_eig < -tol.positivity {
            out.push(Violation::Positivity(min_eig));
        }
    }

    out
}

/// Where population leaving the excited states ends up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SinkTarget {
    Trap,
    Ground,
    None,
}

/// Damping rate applied to the ground–excited coherences `ρ1g`, `ρ2g`, as a
/// fraction of `γt`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroundCoherenceDamping {
    /// `γt/2`
    #[default]
    Half,
    /// `γt/4`. Below the `3γt/8` needed for complete positivity alongside the
    /// `γt` damping of `ρ12`, so strongly driven runs can leave the physical
    /// state space.
    Quarter,
}

impl GroundCoherenceDamping {
    pub fn factor(self) -> f64 {
        match self {
            GroundCoherenceDamping::Half => 0.5,
            GroundCoherenceDamping::Quarter => 0.25,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("omega_21 must be finite and non-negative, got {0}")]
    Splitting(f64),
    #[error("rabi_scale must be finite and non-negative, got {0}")]
    RabiScale(f64),
    #[error("gamma_t must be finite and non-negative, got {0}")]
    SinkRate(f64),
    #[error("sink_target None requires gamma_t = 0, got {0}")]
    SinkWithoutTarget(f64),
    #[error("carrier_detuning must be finite, got {0}")]
    Detuning(f64),
}

/// Physical parameters of the V system. Frequencies in rad/fs, rates in 1/fs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// `(E2 − E1)/ħ`. Zero only for the degenerate limit.
    pub omega_21: f64,
    /// `μ ε0 / ħ`: the drive enters the dynamics as `rabi_scale · ε(t)`.
    pub rabi_scale: f64,
    pub gamma_t: f64,
    pub sink_target: SinkTarget,
    /// Drive carrier offset from the midpoint of |1⟩ and |2⟩.
    pub carrier_detuning: f64,
    #[serde(default)]
    pub ground_coherence_damping: GroundCoherenceDamping,
}

impl SystemParams {
    pub fn check(&self) -> Result<(), ParamError> {
        if !(self.omega_21.is_finite() && self.omega_21 >= 0.0) {
            return Err(ParamError::Splitting(self.omega_21));
        }
        if !(self.rabi_scale.is_finite() && self.rabi_scale >= 0.0) {
            return Err(ParamError::RabiScale(self.rabi_scale));
        }
        if !(self.gamma_t.is_finite() && self.gamma_t >= 0.0) {
            return Err(ParamError::SinkRate(self.gamma_t));
        }
        if self.sink_target == SinkTarget::None && self.gamma_t != 0.0 {
            return Err(ParamError::SinkWithoutTarget(self.gamma_t));
        }
        if !self.carrier_detuning.is_finite() {
            return Err(ParamError::Detuning(self.carrier_detuning));
        }
        Ok(())
    }

    /// `τc = 2π/ω21` in fs (infinite when degenerate).
    pub fn excited_period(&self) -> f64 {
        units::angular_to_period(self.omega_21)
    }

    /// `Ts = 1/γt` in fs (infinite without a sink).
    pub fn sink_time(&self) -> f64 {
        if self.gamma_t == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.gamma_t
        }
    }

    /// Largest admissible step: every active time scale resolved by 50 steps.
    pub fn resolution_cap(&self) -> f64 {
        let rabi_time = if self.rabi_scale > 0.0 {
            1.0 / self.rabi_scale
        } else {
            f64::INFINITY
        };
        let scales = [self.excited_period(), rabi_time, self.sink_time()];
        scales.iter().copied().fold(f64::INFINITY, f64::min) / 50.0
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("t_end ({t_end}) must exceed t_start ({t_start})")]
    Empty { t_start: f64, t_end: f64 },
    #[error("span {span} fs is not an integer multiple of dt = {dt} fs")]
    NotUniform { span: f64, dt: f64 },
}

/// Uniform time grid with `n_steps + 1` sample points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// `t_end − t_start` must be an integer multiple of `dt` (to 1e-9 relative).
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<TimeGrid, GridError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GridError::BadStep(dt));
        }
        if !(t_end > t_start) {
            return Err(GridError::Empty { t_start, t_end });
        }
        let span = t_end - t_start;
        let n = (span / dt).round();
        if n < 1.0 || (n * dt - span).abs() > 1e-9 * span {
            return Err(GridError::NotUniform { span, dt });
        }
        Ok(TimeGrid {
            t_start,
            t_end,
            dt,
            n_steps: n as usize,
        })
    }

    pub fn with_steps(t_start: f64, dt: f64, n_steps: usize) -> Result<TimeGrid, GridError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GridError::BadStep(dt));
        }
        if n_steps == 0 {
            return Err(GridError::Empty {
                t_start,
                t_end: t_start,
            });
        }
        Ok(TimeGrid {
            t_start,
            t_end: t_start + n_steps as f64 * dt,
            dt,
            n_steps,
        })
    }

    /// Finest uniform grid over `[t_start, t_end]` whose step does not exceed
    /// `max_dt`.
    pub fn covering(t_start: f64, t_end: f64, max_dt: f64) -> Result<TimeGrid, GridError> {
        if !(max_dt.is_finite() && max_dt > 0.0) {
            return Err(GridError::BadStep(max_dt));
        }
        if !(t_end > t_start) {
            return Err(GridError::Empty { t_start, t_end });
        }
        let n = ((t_end - t_start) / max_dt).ceil().max(1.0) as usize;
        Ok(TimeGrid {
            t_start,
            t_end,
            dt: (t_end - t_start) / n as f64,
            n_steps: n,
        })
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// Index of the sample nearest to `t`, clamped to the grid.
    pub fn nearest_index(&self, t: f64) -> usize {
        let k = ((t - self.t_start) / self.dt).round();
        k.clamp(0.0, self.n_steps as f64) as usize
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-9 * self.dt;
        t >= self.t_start - slack && t <= self.t_end + slack
    }
}
