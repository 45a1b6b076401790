use vtrap_core::units::{period_to_angular, thz_to_rad_per_fs};
use vtrap_core::{
    build_rhs, eval_cw, eval_pulse_train, new_ground_state, run_trajectory, run_trajectory_with, CwSpec,
    GroundCoherenceDamping, IntegrationOptions, PulseTrainSpec, SinkTarget, SystemParams, TimeGrid,
};

fn params(sink: SinkTarget, gamma: f64) -> SystemParams {
    SystemParams {
        omega_21: period_to_angular(89.0),
        rabi_scale: thz_to_rad_per_fs(10.0),
        gamma_t: gamma,
        sink_target: sink,
        carrier_detuning: 0.0,
        ground_coherence_damping: GroundCoherenceDamping::Half,
    }
}

fn two_pulses() -> PulseTrainSpec {
    PulseTrainSpec { amplitude: 1.0, tau_p: 10.0, centers: vec![250.0, 750.0] }
}

#[test]
fn rabi_oscillation_of_reduced_system() {
    let mut p = params(SinkTarget::None, 0.0);
    p.carrier_detuning = -0.5 * p.omega_21;
    let rhs = build_rhs(&p).unwrap().decouple_level_2();
    let om = p.rabi_scale;
    let period = std::f64::consts::PI / om;
    let grid = TimeGrid::with_steps(0.0, period / 2000.0, 20_000).unwrap();
    let field = eval_cw(&CwSpec { amplitude: 1.0, detuning_from_midpoint: 0.0 }, &grid).unwrap();
    let rec = run_trajectory(&rhs, &field, &new_ground_state()).unwrap();
    let worst = (0..rec.len())
        .map(|k| (rec.rho_11[k] - (om * grid.time(k)).sin().powi(2)).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "worst deviation {worst}");
}

#[test]
fn rk4_is_fourth_order() {
    let grid = TimeGrid::new(0.0, 400.0, 1.0).unwrap();
    let field = eval_cw(&CwSpec { amplitude: 1.0, detuning_from_midpoint: 0.01 }, &grid).unwrap();
    let rhs = build_rhs(&params(SinkTarget::Trap, 1.0 / 50.0)).unwrap();
    let last = |substeps| {
        let opts = IntegrationOptions { substeps, ..IntegrationOptions::default() };
        run_trajectory_with(&rhs, &field, &new_ground_state(), &opts).unwrap().state_at(grid.n_steps)
    };
    let (a, b, c) = (last(1), last(2), last(4));
    let ratio = a.max_abs_diff(&b) / b.max_abs_diff(&c);
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn detuning_moves_between_field_and_frame() {
    let grid = TimeGrid::new(0.0, 600.0, 0.1).unwrap();
    let delta = 0.013;
    let base = params(SinkTarget::Trap, 1.0 / 140.0);
    let in_field = eval_cw(&CwSpec { amplitude: 0.3, detuning_from_midpoint: delta }, &grid).unwrap();
    let plain = eval_cw(&CwSpec { amplitude: 0.3, detuning_from_midpoint: 0.0 }, &grid).unwrap();
    let mut shifted = base;
    shifted.carrier_detuning = -delta;
    let a = run_trajectory(&build_rhs(&base).unwrap(), &in_field, &new_ground_state()).unwrap();
    let b = run_trajectory(&build_rhs(&shifted).unwrap(), &plain, &new_ground_state()).unwrap();
    assert!(a.max_population_deviation(&b) <= 1e-6);
    let coh = a.abs_rho_12().iter().zip(b.abs_rho_12()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(coh <= 1e-6);
    // the detuning matters at all
    let c = run_trajectory(&build_rhs(&base).unwrap(), &plain, &new_ground_state()).unwrap();
    assert!(a.max_population_deviation(&c) > 1e-3);
}

#[test]
fn weak_field_response_is_quadratic() {
    let grid = TimeGrid::new(0.0, 1000.0, 0.2).unwrap();
    let field = eval_pulse_train(&two_pulses(), &grid).unwrap();
    let run = |s: f64| {
        let mut p = params(SinkTarget::Trap, 1.0 / 20.0);
        p.rabi_scale *= s;
        run_trajectory(&build_rhs(&p).unwrap(), &field, &new_ground_state()).unwrap()
    };
    let (a, b) = (run(0.005), run(0.01));
    let peak = |r: &vtrap_core::TrajectoryRecord| r.abs_rho_12().into_iter().fold(0.0, f64::max);
    let ratio = peak(&b) / peak(&a);
    assert!((ratio / 4.0 - 1.0).abs() < 0.05, "ratio {ratio}");
    let peak_c = |r: &vtrap_core::TrajectoryRecord| r.c.iter().flatten().copied().fold(0.0, f64::max);
    assert!((peak_c(&b) / peak_c(&a) - 1.0).abs() < 0.01);
}

#[test]
fn ground_coherence_damping_flag_changes_dynamics() {
    let grid = TimeGrid::new(0.0, 1000.0, 0.2).unwrap();
    let field = eval_pulse_train(&two_pulses(), &grid).unwrap();
    // the quarter rate is below the completely-positive bound, so per-step
    // positivity checks are off
    let opts = IntegrationOptions { check_invariants: false, ..IntegrationOptions::default() };
    let mut p = params(SinkTarget::Trap, 1.0 / 20.0);
    let half = run_trajectory_with(&build_rhs(&p).unwrap(), &field, &new_ground_state(), &opts).unwrap();
    p.ground_coherence_damping = GroundCoherenceDamping::Quarter;
    let quarter = run_trajectory_with(&build_rhs(&p).unwrap(), &field, &new_ground_state(), &opts).unwrap();
    assert!(half.max_population_deviation(&quarter) > 1e-6);
    let n = grid.n_steps;
    let total = quarter.rho_tt[n] + quarter.rho_gg[n] + quarter.rho_11[n] + quarter.rho_22[n];
    assert!((total - 1.0).abs() < 1e-9);
    let min_eig = |r: &vtrap_core::TrajectoryRecord| (0..=n).map(|k| r.state_at(k).min_eigenvalue()).fold(f64::INFINITY, f64::min);
    assert!(min_eig(&half) > -1e-8);
    assert!(min_eig(&quarter) < -1e-3);
}

#[test]
fn zero_field_leaves_ground_state() {
    let grid = TimeGrid::new(0.0, 100.0, 0.5).unwrap();
    let field = vtrap_core::SampledField::zero(grid);
    let rec = run_trajectory(&build_rhs(&params(SinkTarget::Trap, 0.05)).unwrap(), &field, &new_ground_state()).unwrap();
    assert!(rec.rho_11.iter().chain(&rec.rho_22).chain(&rec.rho_tt).all(|&x| x == 0.0));
    assert!(rec.c.iter().all(Option::is_none));
    assert_eq!(rec.len(), grid.n_steps + 1);
}
