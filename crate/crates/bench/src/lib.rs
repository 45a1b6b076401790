//! Fixtures shared by the benchmarks.

use vtrap_core::units::{ghz_to_rad_per_fs, period_to_angular, thz_to_rad_per_fs};
use vtrap_core::{
    recommended_step, EnsembleSpec, FieldSpec, GroundCoherenceDamping, MeasureOrder, NoiseSharing, NoisyPulseSpec,
    PulseTrainSpec, SinkTarget, SystemParams, TimeGrid,
};

/// Two 10 fs pulses on a 10 THz, 89 fs system draining into the trap in 20 fs.
pub fn coherent_setup() -> (SystemParams, PulseTrainSpec, TimeGrid) {
    let params = SystemParams {
        omega_21: period_to_angular(89.0),
        rabi_scale: thz_to_rad_per_fs(10.0),
        gamma_t: 1.0 / 20.0,
        sink_target: SinkTarget::Trap,
        carrier_detuning: 0.0,
        ground_coherence_damping: GroundCoherenceDamping::Half,
    };
    let spec = PulseTrainSpec { amplitude: 1.0, tau_p: 10.0, centers: vec![250.0, 750.0] };
    let dt = recommended_step(&params, &FieldSpec::PulseTrain(spec.clone()));
    (params, spec, TimeGrid::covering(0.0, 1000.0, dt).expect("valid span"))
}

/// The noisy two-pulse ensemble at 631 GHz with `n` realizations.
pub fn noisy_ensemble(n: usize) -> EnsembleSpec {
    let params = SystemParams {
        omega_21: period_to_angular(89.0),
        rabi_scale: ghz_to_rad_per_fs(631.0),
        gamma_t: 1.0 / 20.0,
        sink_target: SinkTarget::Trap,
        carrier_detuning: 0.0,
        ground_coherence_damping: GroundCoherenceDamping::Half,
    };
    let field = NoisyPulseSpec {
        amplitude: 1.0,
        tau_p: 100.0,
        tau_d: 10.0,
        centers: vec![50.0, 550.0],
        carrier_offset: 0.0,
        sharing: NoiseSharing::Shared,
    };
    let dt = recommended_step(&params, &FieldSpec::NoisyPulse(field.clone()));
    EnsembleSpec {
        n_realizations: n,
        base_seed: 1,
        params,
        field,
        grid: TimeGrid::covering(-450.0, 1050.0, dt).expect("valid span"),
        convergence_target: None,
        measure: MeasureOrder::AverageThenMeasure,
        explicit_seeds: None,
    }
}
