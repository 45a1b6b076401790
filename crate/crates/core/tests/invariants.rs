use proptest::prelude::*;
use vtrap_core::units::thz_to_rad_per_fs;
use vtrap_core::state::{validate, ValidityTolerances};
use vtrap_core::{
    build_rhs, eval_pulse_train, recommended_step, FieldSpec, new_ground_state, purity, run_trajectory, GroundCoherenceDamping, PulseTrainSpec,
    SinkTarget, SystemParams, TimeGrid,
};

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn sink() -> impl Strategy<Value = SinkTarget> {
    prop_oneof![Just(SinkTarget::Trap), Just(SinkTarget::Ground), Just(SinkTarget::None)]
}

fn run(tau_c: f64, rabi: f64, sink_time: f64, target: SinkTarget) -> vtrap_core::TrajectoryRecord {
    let p = SystemParams {
        omega_21: 2.0 * std::f64::consts::PI / tau_c,
        rabi_scale: rabi,
        gamma_t: if target == SinkTarget::None { 0.0 } else { 1.0 / sink_time },
        sink_target: target,
        carrier_detuning: 0.0,
        ground_coherence_damping: GroundCoherenceDamping::Half,
    };
    let spec = PulseTrainSpec { amplitude: 1.0, tau_p: 10.0, centers: vec![150.0, 400.0] };
    let dt = recommended_step(&p, &FieldSpec::PulseTrain(spec.clone()));
    let grid = TimeGrid::covering(0.0, 600.0, dt).unwrap();
    let field = eval_pulse_train(&spec, &grid).unwrap();
    run_trajectory(&build_rhs(&p).unwrap(), &field, &new_ground_state()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn records_stay_physical(
        tau_c in log_uniform(20.0, 500.0),
        rabi in log_uniform(thz_to_rad_per_fs(0.6), thz_to_rad_per_fs(10.0)),
        sink_time in log_uniform(10.0, 1000.0),
        target in sink(),
    ) {
        let rec = run(tau_c, rabi, sink_time, target);
        let tol = ValidityTolerances::default();
        for k in 0..rec.len() {
            let s = rec.state_at(k);
            prop_assert!(validate(&s, &tol).is_empty());
            if k > 0 {
                prop_assert!(rec.rho_tt[k] >= rec.rho_tt[k - 1]);
            }
            match target {
                SinkTarget::None => prop_assert!((purity(&s) - 1.0).abs() < 1e-8),
                SinkTarget::Ground => prop_assert_eq!(rec.rho_tt[k], 0.0),
                SinkTarget::Trap => {}
            }
        }
    }
}
