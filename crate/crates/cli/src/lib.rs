//! Config handling, run execution and figure reproduction for vtrap.

pub mod config;
pub mod figures;
pub mod noise_check;
pub mod run;

pub use config::{default_config, parse_config, render_config, ConfigError, ScenarioConfig, ScenarioKind};
pub use run::{execute, replay, run_scenario, RunError, RunFlag, RunMetadata, RunOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_FLAGGED: i32 = 4;
