//! Density-matrix dynamics of a four-level V system with a trap level,
//! driven by coherent or partially coherent pulses.
//!
//! Units are femtoseconds and radians per femtosecond throughout. Energies are
//! measured in a frame rotating at the carrier frequency, with the ground
//! level at zero.

pub mod dynamics;
pub mod ensemble;
pub mod fields;
pub mod observables;
pub mod state;
pub mod stats;
pub mod units;

pub use dynamics::{
    build_rhs, build_rhs_closed, build_rhs_ground_relax, build_rhs_trap, grid_convergence, run_trajectory,
    run_trajectory_with, recommended_step, step_rk4, DynamicsError, IntegrationOptions, ScenarioRhs, ScenarioTag, TrajectoryRecord,
};
pub use ensemble::{
    convergence_report, run_ensemble, ConvergenceReport, EnsembleError, EnsembleResult, EnsembleSpec,
    EnsembleWarning, MeasureOrder, RealizationRunner,
};
pub use fields::{
    estimate_two_time_correlation, eval_cw, eval_pulse_train, expected_correlation, split_seed,
    synthesize_noisy_pulse, CorrelationEstimate, CwSpec, FieldError, FieldSpec, NoiseSharing, NoiseSynthesizer,
    NoisyPulseSpec, PulseTrainSpec, SampledField,
};
pub use observables::{
    burst_peaks, coherence_fraction, count_bursts, purity, resurgence_gain, window_peak, ObservableError,
    PulseWindow, Quantity,
};
pub use state::{
    new_ground_state, validate, DensityState, GridError, GroundCoherenceDamping, ParamError, SinkTarget,
    SystemParams, TimeGrid, ValidityTolerances, Violation, C64,
};
