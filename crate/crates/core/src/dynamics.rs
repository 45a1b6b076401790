//! Equations of motion and their integration.
//!
//! Everything is integrated in the frame rotating at the drive carrier, with
//! the ground level at zero energy and the excited levels at
//! `∓ω21/2 − carrier_detuning`. With the coupling `H_{g,i} = −Ω(t)`,
//! `H_{i,g} = −Ω*(t)` and `dρ/dt = i[ρ, H] − Lρ`, the hand-written equations
//! below are the element-wise expansion of that commutator plus the sink terms:
//!
//! ```text
//! dρ11/dt = i(Ω* ρ1g* − Ω ρ1g) − (γ/2) ρ11
//! dρ22/dt = i(Ω* ρ2g* − Ω ρ2g) − (γ/2) ρ22
//! dρ12/dt = i(ω21 ρ12 + Ω* ρ2g* − Ω ρ1g) − γ ρ12
//! dρgg/dt = i(Ω ρ1g + Ω ρ2g − Ω* ρ1g* − Ω* ρ2g*)   [+ (γ/2)(ρ11 + ρ22) for Ground]
//! dρtt/dt = (γ/2)(ρ11 + ρ22)                        [Trap only]
//! dρ1g/dt = iΩ*(ρgg − ρ11 − ρ12) − i E1 ρ1g − κγ ρ1g
//! dρ2g/dt = iΩ*(ρgg − ρ22 − ρ12*) − i E2 ρ2g − κγ ρ2g
//! ```
//!
//! where `κ` is 1/2 (default) or 1/4. Trap coherences are never generated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{FieldError, FieldSpec, SampledField};
use crate::observables::coherence_fraction;
use crate::state::{
    validate, DensityState, ParamError, SinkTarget, SystemParams, TimeGrid, ValidityTolerances, Violation,
    EXCITED_1, EXCITED_2, GROUND, TRAP,
};

type C64 = num_complex::Complex64;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("scenario expects sink target {expected:?}, params have {found:?}")]
    WrongScenario { expected: SinkTarget, found: SinkTarget },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    OutOfGrid(#[from] FieldError),
    #[error("step {dt} fs is not an integer divisor of the field grid spacing {grid_dt} fs")]
    StepMismatch { dt: f64, grid_dt: f64 },
    #[error("invariant violated at step {step} (t = {t} fs): {}", format_violations(.violations))]
    InvariantViolation {
        step: usize,
        t: f64,
        violations: Vec<Violation>,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Which sink terms the right-hand side carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioTag {
    Trap,
    GroundRelax,
    Closed,
}

/// Right-hand side of the density-matrix equation for one scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioRhs {
    pub tag: ScenarioTag,
    pub params: SystemParams,
    e1: f64,
    e2: f64,
    // scales the |g>-|2> coupling; 1 except in the two-level reduction
    couple_2: f64,
}

fn checked(params: &SystemParams, expected: SinkTarget, tag: ScenarioTag) -> Result<ScenarioRhs, DynamicsError> {
    if params.sink_target != expected {
        return Err(DynamicsError::WrongScenario {
            expected,
            found: params.sink_target,
        });
    }
    params.check()?;
    Ok(ScenarioRhs {
        tag,
        params: *params,
        e1: -0.5 * params.omega_21 - params.carrier_detuning,
        e2: 0.5 * params.omega_21 - params.carrier_detuning,
        couple_2: 1.0,
    })
}

/// Excited states drain irreversibly into the trap level.
pub fn build_rhs_trap(params: &SystemParams) -> Result<ScenarioRhs, DynamicsError> {
    checked(params, SinkTarget::Trap, ScenarioTag::Trap)
}

/// Excited states relax back to the ground level; the trap stays empty.
pub fn build_rhs_ground_relax(params: &SystemParams) -> Result<ScenarioRhs, DynamicsError> {
    checked(params, SinkTarget::Ground, ScenarioTag::GroundRelax)
}

/// No sink at all (`γt` must be zero).
pub fn build_rhs_closed(params: &SystemParams) -> Result<ScenarioRhs, DynamicsError> {
    checked(params, SinkTarget::None, ScenarioTag::Closed)
}

/// Picks the builder matching `params.sink_target`.
pub fn build_rhs(params: &SystemParams) -> Result<ScenarioRhs, DynamicsError> {
    match params.sink_target {
        SinkTarget::Trap => build_rhs_trap(params),
        SinkTarget::Ground => build_rhs_ground_relax(params),
        SinkTarget::None => build_rhs_closed(params),
    }
}

impl ScenarioRhs {
    /// Drops the ground–|2⟩ coupling, leaving a driven two-level system with
    /// |2⟩ as a spectator.
    pub fn decouple_level_2(mut self) -> Self {
        self.couple_2 = 0.0;
        self
    }

    /// Excited-level energies `(E1, E2)` in the rotating frame.
    pub fn level_energies(&self) -> (f64, f64) {
        (self.e1, self.e2)
    }

    /// `dρ/dt` at time `t` given the field envelope value there.
    pub fn derivative(&self, _t: f64, rho: &DensityState, field: C64) -> DensityState {
        let p = &self.params;
        let om1 = field * p.rabi_scale;
        let om2 = om1 * self.couple_2;
        let (om1c, om2c) = (om1.conj(), om2.conj());
        let g = p.gamma_t;
        let kappa = g * p.ground_coherence_damping.factor();

        let rgg = rho[(GROUND, GROUND)].re;
        let r11 = rho[(EXCITED_1, EXCITED_1)].re;
        let r22 = rho[(EXCITED_2, EXCITED_2)].re;
        let r12 = rho[(EXCITED_1, EXCITED_2)];
        let r1g = rho[(EXCITED_1, GROUND)];
        let r2g = rho[(EXCITED_2, GROUND)];

        // Ω ρig and its conjugate appear in every population equation
        let a1 = om1 * r1g;
        let a2 = om2 * r2g;
        let pump1 = (I * (a1.conj() - a1)).re;
        let pump2 = (I * (a2.conj() - a2)).re;
        let outflow = 0.5 * g * (r11 + r22);

        let d11 = pump1 - 0.5 * g * r11;
        let d22 = pump2 - 0.5 * g * r22;
        let mut dgg = -(pump1 + pump2);
        let mut dtt = 0.0;
        match self.tag {
            ScenarioTag::Trap => dtt = outflow,
            ScenarioTag::GroundRelax => dgg += outflow,
            ScenarioTag::Closed => {}
        }

        let d12 = I * (p.omega_21 * r12 + om1c * r2g.conj() - om2 * r1g) - g * r12;
        let d1g = I * (om1c * (rgg - r11) - om2c * r12) - I * self.e1 * r1g - kappa * r1g;
        let d2g = I * (om2c * (rgg - r22) - om1c * r12.conj()) - I * self.e2 * r2g - kappa * r2g;

        let mut d = DensityState::zeros();
        d[(GROUND, GROUND)] = C64::new(dgg, 0.0);
        d[(EXCITED_1, EXCITED_1)] = C64::new(d11, 0.0);
        d[(EXCITED_2, EXCITED_2)] = C64::new(d22, 0.0);
        d[(TRAP, TRAP)] = C64::new(dtt, 0.0);
        d[(EXCITED_1, EXCITED_2)] = d12;
        d[(EXCITED_2, EXCITED_1)] = d12.conj();
        d[(EXCITED_1, GROUND)] = d1g;
        d[(GROUND, EXCITED_1)] = d1g.conj();
        d[(EXCITED_2, GROUND)] = d2g;
        d[(GROUND, EXCITED_2)] = d2g.conj();
        d
    }
}

fn check_step(dt: f64, grid_dt: f64) -> Result<(), DynamicsError> {
    let ratio = grid_dt / dt;
    if !(dt > 0.0) || ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
        return Err(DynamicsError::StepMismatch { dt, grid_dt });
    }
    Ok(())
}

/// Fraction of the resolution cap used as the default step. At the cap itself
/// RK4 truncation error lets nearly pure states drift to eigenvalues around
/// `−1e-7` under strong drive.
pub const DEFAULT_STEP_FRACTION: f64 = 0.25;

/// Fraction used without a sink. States then stay pure for the whole run and
/// the drift, which grows as `dt⁴` and linearly in run length, is not undone.
pub const CLOSED_STEP_FRACTION: f64 = 0.0625;

/// Default grid spacing: a fraction of the tighter of the system and field caps.
pub fn recommended_step(params: &SystemParams, field: &FieldSpec) -> f64 {
    let fraction = if params.gamma_t == 0.0 { CLOSED_STEP_FRACTION } else { DEFAULT_STEP_FRACTION };
    fraction * params.resolution_cap().min(field.resolution_limit())
}

/// One classical RK4 step of size `dt` from `t`, followed by re-Hermitization.
pub fn step_rk4(
    rhs: &ScenarioRhs,
    state: &DensityState,
    t: f64,
    dt: f64,
    field: &SampledField,
) -> Result<DensityState, DynamicsError> {
    check_step(dt, field.grid.dt)?;
    let f0 = field.eval(t)?;
    let fh = field.eval(t + 0.5 * dt)?;
    let f1 = field.eval(t + dt)?;
    let mut next = rk4_raw(rhs, state, t, dt, f0, fh, f1);
    next.rehermitize();
    Ok(next)
}

fn rk4_raw(rhs: &ScenarioRhs, y: &DensityState, t: f64, dt: f64, f0: C64, fh: C64, f1: C64) -> DensityState {
    let k1 = rhs.derivative(t, y, f0);
    let k2 = rhs.derivative(t + 0.5 * dt, &y.plus_scaled(0.5 * dt, &k1), fh);
    let k3 = rhs.derivative(t + 0.5 * dt, &y.plus_scaled(0.5 * dt, &k2), fh);
    let k4 = rhs.derivative(t + dt, &y.plus_scaled(dt, &k3), f1);
    let mut out = *y;
    out.add_scaled(dt / 6.0, &k1);
    out.add_scaled(dt / 3.0, &k2);
    out.add_scaled(dt / 3.0, &k3);
    out.add_scaled(dt / 6.0, &k4);
    out
}

/// Integration knobs for [`run_trajectory_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationOptions {
    /// RK4 sub-steps per grid interval (1 = step at the grid spacing).
    pub substeps: usize,
    pub tolerances: ValidityTolerances,
    /// Validate the state after every step and abort on the first violation.
    pub check_invariants: bool,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            substeps: 1,
            tolerances: ValidityTolerances::default(),
            check_invariants: true,
        }
    }
}

/// Time series of the recorded density-matrix elements.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub grid: TimeGrid,
    pub rho_gg: Vec<f64>,
    pub rho_11: Vec<f64>,
    pub rho_22: Vec<f64>,
    pub rho_tt: Vec<f64>,
    pub rho_12: Vec<C64>,
    pub rho_1g: Vec<C64>,
    pub rho_2g: Vec<C64>,
    /// Coherence fraction; `None` where the excited population is below the floor.
    pub c: Vec<Option<f64>>,
    pub params: SystemParams,
    pub field_spec_digest: String,
}

impl TrajectoryRecord {
    pub(crate) fn with_capacity(grid: TimeGrid, params: SystemParams, digest: String) -> Self {
        let n = grid.len();
        TrajectoryRecord {
            grid,
            rho_gg: Vec::with_capacity(n),
            rho_11: Vec::with_capacity(n),
            rho_22: Vec::with_capacity(n),
            rho_tt: Vec::with_capacity(n),
            rho_12: Vec::with_capacity(n),
            rho_1g: Vec::with_capacity(n),
            rho_2g: Vec::with_capacity(n),
            c: Vec::with_capacity(n),
            params,
            field_spec_digest: digest,
        }
    }

    pub(crate) fn push(&mut self, s: &DensityState) {
        self.rho_gg.push(s.rho_gg());
        self.rho_11.push(s.rho_11());
        self.rho_22.push(s.rho_22());
        self.rho_tt.push(s.rho_tt());
        self.rho_12.push(s.rho_12());
        self.rho_1g.push(s.rho_1g());
        self.rho_2g.push(s.rho_2g());
        self.c.push(coherence_fraction(s.rho_11(), s.rho_22(), s.rho_12()));
    }

    pub fn len(&self) -> usize {
        self.rho_gg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_gg.is_empty()
    }

    pub fn abs_rho_12(&self) -> Vec<f64> {
        self.rho_12.iter().map(|z| z.norm()).collect()
    }

    /// Reassembles the density matrix at sample `k` (trap coherences are zero).
    pub fn state_at(&self, k: usize) -> DensityState {
        let mut s = DensityState::zeros();
        s[(GROUND, GROUND)] = C64::new(self.rho_gg[k], 0.0);
        s[(EXCITED_1, EXCITED_1)] = C64::new(self.rho_11[k], 0.0);
        s[(EXCITED_2, EXCITED_2)] = C64::new(self.rho_22[k], 0.0);
        s[(TRAP, TRAP)] = C64::new(self.rho_tt[k], 0.0);
        s[(EXCITED_1, EXCITED_2)] = self.rho_12[k];
        s[(EXCITED_2, EXCITED_1)] = self.rho_12[k].conj();
        s[(EXCITED_1, GROUND)] = self.rho_1g[k];
        s[(GROUND, EXCITED_1)] = self.rho_1g[k].conj();
        s[(EXCITED_2, GROUND)] = self.rho_2g[k];
        s[(GROUND, EXCITED_2)] = self.rho_2g[k].conj();
        s
    }

    /// Largest population difference between two records on the same grid.
    pub fn max_population_deviation(&self, other: &TrajectoryRecord) -> f64 {
        let cols = [
            (&self.rho_gg, &other.rho_gg),
            (&self.rho_11, &other.rho_11),
            (&self.rho_22, &other.rho_22),
            (&self.rho_tt, &other.rho_tt),
        ];
        cols.iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Integrates `initial` over the whole field grid with default options.
pub fn run_trajectory(
    rhs: &ScenarioRhs,
    field: &SampledField,
    initial: &DensityState,
) -> Result<TrajectoryRecord, DynamicsError> {
    run_trajectory_with(rhs, field, initial, &IntegrationOptions::default())
}

/// Integrates over the field grid, recording every grid sample.
pub fn run_trajectory_with(
    rhs: &ScenarioRhs,
    field: &SampledField,
    initial: &DensityState,
    opts: &IntegrationOptions,
) -> Result<TrajectoryRecord, DynamicsError> {
    let grid = field.grid;
    let substeps = opts.substeps.max(1);
    let h = grid.dt / substeps as f64;
    let check = |step: usize, t: f64, s: &DensityState| -> Result<(), DynamicsError> {
        if !opts.check_invariants {
            return Ok(());
        }
        let violations = validate(s, &opts.tolerances);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(DynamicsError::InvariantViolation { step, t, violations })
        }
    };

    let mut record = TrajectoryRecord::with_capacity(grid, rhs.params, field.digest().to_string());
    check(0, grid.t_start, initial)?;
    let mut state = *initial;
    record.push(&state);

    for k in 0..grid.n_steps {
        let t0 = grid.time(k);
        if substeps == 1 && field.is_analytic() {
            state = step_rk4(rhs, &state, t0, grid.dt, field)?;
        } else if substeps == 1 {
            // grid samples at both ends, interpolated midpoint
            let f0 = field.values[k];
            let f1 = field.values[k + 1];
            let fh = field.eval(t0 + 0.5 * grid.dt)?;
            state = rk4_raw(rhs, &state, t0, grid.dt, f0, fh, f1);
            state.rehermitize();
        } else {
            for j in 0..substeps {
                state = step_rk4(rhs, &state, t0 + j as f64 * h, h, field)?;
            }
        }
        check(k + 1, grid.time(k + 1), &state)?;
        record.push(&state);
    }
    Ok(record)
}

/// Convenience wrapper: the same run at `dt` and at `dt/2`, returning both
/// records and the largest population deviation between them.
pub fn grid_convergence(
    rhs: &ScenarioRhs,
    field: &SampledField,
    initial: &DensityState,
) -> Result<(TrajectoryRecord, TrajectoryRecord, f64), DynamicsError> {
    let coarse = run_trajectory(rhs, field, initial)?;
    let fine = run_trajectory_with(
        rhs,
        field,
        initial,
        &IntegrationOptions {
            substeps: 2,
            ..IntegrationOptions::default()
        },
    )?;
    let dev = coarse.max_population_deviation(&fine);
    Ok((coarse, fine, dev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{eval_cw, CwSpec};
    use crate::state::{new_ground_state, GroundCoherenceDamping};

    fn params(sink: SinkTarget, gamma: f64) -> SystemParams {
        SystemParams {
            omega_21: 2.0 * std::f64::consts::PI / 89.0,
            rabi_scale: 0.0628,
            gamma_t: gamma,
            sink_target: sink,
            carrier_detuning: 0.0,
            ground_coherence_damping: GroundCoherenceDamping::Half,
        }
    }

    #[test]
    fn builders_reject_wrong_sink() {
        assert_eq!(
            build_rhs_trap(&params(SinkTarget::Ground, 0.1)),
            Err(DynamicsError::WrongScenario {
                expected: SinkTarget::Trap,
                found: SinkTarget::Ground
            })
        );
        assert!(build_rhs_ground_relax(&params(SinkTarget::Trap, 0.1)).is_err());
        assert!(build_rhs_closed(&params(SinkTarget::None, 0.1)).is_err());
        assert!(build_rhs(&params(SinkTarget::Ground, 0.1)).is_ok());
    }

    #[test]
    fn derivative_is_traceless_and_hermitian() {
        let psi = [
            C64::new(0.6, 0.1),
            C64::new(0.3, -0.4),
            C64::new(-0.2, 0.5),
            C64::new(0.0, 0.0),
        ];
        let mut rho = DensityState::from_pure(psi);
        rho[(TRAP, TRAP)] = C64::new(0.0, 0.0);
        for sink in [SinkTarget::Trap, SinkTarget::Ground] {
            let rhs = build_rhs(&params(sink, 0.05)).unwrap();
            let d = rhs.derivative(0.0, &rho, C64::new(0.7, -0.3));
            assert!(d.trace().norm() < 1e-16, "{sink:?}");
            assert_eq!(d.hermiticity_defect(), 0.0);
        }
    }

    #[test]
    fn zero_rhs_leaves_state_bit_identical() {
        let p = SystemParams {
            omega_21: 0.0,
            rabi_scale: 0.0,
            gamma_t: 0.0,
            sink_target: SinkTarget::None,
            carrier_detuning: 0.0,
            ground_coherence_damping: GroundCoherenceDamping::Half,
        };
        let rhs = build_rhs(&p).unwrap();
        let grid = TimeGrid::new(0.0, 10.0, 0.5).unwrap();
        let field = eval_cw(&CwSpec { amplitude: 1.0, detuning_from_midpoint: 0.0 }, &grid).unwrap();
        let rho = DensityState::from_pure([
            C64::new(0.5, 0.0),
            C64::new(0.5, 0.5),
            C64::new(0.0, -0.5),
            C64::new(0.0, 0.0),
        ]);
        let next = step_rk4(&rhs, &rho, 1.0, 0.5, &field).unwrap();
        assert_eq!(next, rho);
    }

    #[test]
    fn two_level_rabi_oracle() {
        // |1> on resonance, |2> decoupled: ρ11 = sin²(Ω0 t), ρ1g = (i/2) sin(2 Ω0 t)
        let mut p = params(SinkTarget::None, 0.0);
        p.carrier_detuning = -0.5 * p.omega_21;
        let rhs = build_rhs(&p).unwrap().decouple_level_2();
        assert_eq!(rhs.level_energies().0, 0.0);
        let om = p.rabi_scale;
        let period = std::f64::consts::PI / om;
        let grid = TimeGrid::with_steps(0.0, 10.0 * period / 20_000.0, 20_000).unwrap();
        let field = eval_cw(&CwSpec { amplitude: 1.0, detuning_from_midpoint: 0.0 }, &grid).unwrap();
        let rec = run_trajectory(&rhs, &field, &new_ground_state()).unwrap();
        for k in 0..rec.len() {
            let t = grid.time(k);
            assert!((rec.rho_11[k] - (om * t).sin().powi(2)).abs() < 1e-6, "t = {t}");
            let coh = C64::new(0.0, 0.5 * (2.0 * om * t).sin());
            assert!((rec.rho_1g[k] - coh).norm() < 1e-6, "t = {t}");
            assert!(rec.rho_22[k].abs() < 1e-15);
        }
    }

    #[test]
    fn free_precession_and_decay() {
        let grid = TimeGrid::new(0.0, 200.0, 0.25).unwrap();
        let field = SampledField::zero(grid);
        // ρ12 precesses at ω21 with constant modulus when γ = 0
        let mut rho = DensityState::from_populations([0.0, 0.5, 0.5, 0.0]);
        rho[(1, 2)] = C64::new(0.5, 0.0);
        rho[(2, 1)] = C64::new(0.5, 0.0);
        let p = params(SinkTarget::Trap, 0.0);
        let rec = run_trajectory(&build_rhs(&p).unwrap(), &field, &rho).unwrap();
        for (k, z) in rec.rho_12.iter().enumerate() {
            let t = grid.time(k);
            let exact = C64::from_polar(0.5, p.omega_21 * t);
            assert!((z - exact).norm() < 1e-7, "t = {t}");
        }
        // ρ11 = exp(−γt/2), ρtt = 1 − exp(−γt/2)
        let g = 0.05;
        let rho = DensityState::from_populations([0.0, 1.0, 0.0, 0.0]);
        let rec = run_trajectory(&build_rhs(&params(SinkTarget::Trap, g)).unwrap(), &field, &rho).unwrap();
        for k in (0..grid.len()).step_by(40) {
            let t = grid.time(k);
            assert!((rec.rho_11[k] - (-0.5 * g * t).exp()).abs() < 1e-10);
            assert!((rec.rho_tt[k] - (1.0 - (-0.5 * g * t).exp())).abs() < 1e-10);
        }
        let rec = run_trajectory(&build_rhs(&params(SinkTarget::Ground, g)).unwrap(), &field, &rho).unwrap();
        for k in (0..grid.len()).step_by(40) {
            let t = grid.time(k);
            assert!((rec.rho_gg[k] - (1.0 - (-0.5 * g * t).exp())).abs() < 1e-10);
            assert_eq!(rec.rho_tt[k], 0.0);
            let tr = rec.rho_gg[k] + rec.rho_11[k] + rec.rho_22[k];
            assert!((tr - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_from_ground_stays_put() {
        let grid = TimeGrid::new(0.0, 50.0, 0.5).unwrap();
        let rec = run_trajectory(
            &build_rhs(&params(SinkTarget::Trap, 0.05)).unwrap(),
            &SampledField::zero(grid),
            &new_ground_state(),
        )
        .unwrap();
        assert!(rec.rho_gg.iter().all(|&x| x == 1.0));
        assert!(rec.rho_12.iter().all(|z| z.norm() == 0.0));
        assert!(rec.c.iter().all(|c| c.is_none()));
        assert_eq!(rec.len(), grid.len());
    }

    #[test]
    fn invalid_initial_state_aborts() {
        let grid = TimeGrid::new(0.0, 5.0, 0.5).unwrap();
        let bad = DensityState::from_populations([0.5, 0.0, 0.0, 0.0]);
        let err = run_trajectory(
            &build_rhs(&params(SinkTarget::Trap, 0.05)).unwrap(),
            &SampledField::zero(grid),
            &bad,
        )
        .unwrap_err();
        assert!(matches!(err, DynamicsError::InvariantViolation { step: 0, .. }));
    }

    #[test]
    fn step_must_divide_grid_spacing() {
        let grid = TimeGrid::new(0.0, 5.0, 0.5).unwrap();
        let rhs = build_rhs(&params(SinkTarget::Trap, 0.05)).unwrap();
        let f = SampledField::zero(grid);
        let s = new_ground_state();
        assert!(step_rk4(&rhs, &s, 0.0, 0.25, &f).is_ok());
        assert!(matches!(step_rk4(&rhs, &s, 0.0, 0.3, &f), Err(DynamicsError::StepMismatch { .. })));
        assert!(matches!(step_rk4(&rhs, &s, 4.75, 0.5, &f), Err(DynamicsError::OutOfGrid(_))));
    }
}
