//! Scenario configuration files.
//!
//! A config is a TOML document. Every key is optional except `scenario`;
//! missing keys take the scenario's defaults. Keys that do not apply to the
//! chosen scenario are rejected, as are unknown keys.
//!
//! ```toml
//! scenario = "CoherentPulseTrap"
//!
//! [system]
//! sink_time_fs = 140.0
//!
//! [grid]
//! t_end_fs = 1200.0
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vtrap_core::units::{period_to_angular, sink_time_to_rate, thz_to_rad_per_fs};
use vtrap_core::{
    recommended_step, CwSpec, FieldSpec, GroundCoherenceDamping, MeasureOrder, NoiseSharing, NoisyPulseSpec,
    PulseTrainSpec, SinkTarget, SystemParams, TimeGrid,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    /// Two coherent Gaussian pulses, excited states drain into the trap.
    CoherentPulseTrap,
    /// Continuous drive, excited states relax to the ground level.
    CwGround,
    /// Continuous drive, excited states drain into the trap.
    CwTrap,
    /// Two noisy pulses, ensemble averaged, with a trap.
    NoisyPulseTrap,
    /// Two noisy pulses, ensemble averaged, no sink at all.
    NoisyPulseNoTrap,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::CoherentPulseTrap,
        ScenarioKind::CwGround,
        ScenarioKind::CwTrap,
        ScenarioKind::NoisyPulseTrap,
        ScenarioKind::NoisyPulseNoTrap,
    ];

    pub fn sink_target(self) -> SinkTarget {
        match self {
            ScenarioKind::CwGround => SinkTarget::Ground,
            ScenarioKind::NoisyPulseNoTrap => SinkTarget::None,
            _ => SinkTarget::Trap,
        }
    }

    pub fn is_noisy(self) -> bool {
        matches!(self, ScenarioKind::NoisyPulseTrap | ScenarioKind::NoisyPulseNoTrap)
    }

    fn field_kind(self) -> FieldKind {
        match self {
            ScenarioKind::CoherentPulseTrap => FieldKind::PulseTrain,
            ScenarioKind::CwGround | ScenarioKind::CwTrap => FieldKind::Cw,
            ScenarioKind::NoisyPulseTrap | ScenarioKind::NoisyPulseNoTrap => FieldKind::Noisy,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum FieldKind {
    PulseTrain,
    Cw,
    Noisy,
}

/// System parameters in the units used by config files.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemConfig {
    pub rabi_frequency_thz: f64,
    /// `2π/ω21`; infinite for degenerate excited levels.
    pub excited_period_fs: f64,
    /// `1/γt`; infinite for no sink.
    pub sink_time_fs: f64,
    pub sink_target: SinkTarget,
    pub carrier_detuning_rad_per_fs: f64,
    pub ground_coherence_damping: GroundCoherenceDamping,
}

impl SystemConfig {
    pub fn params(&self) -> SystemParams {
        SystemParams {
            omega_21: period_to_angular(self.excited_period_fs),
            rabi_scale: thz_to_rad_per_fs(self.rabi_frequency_thz),
            gamma_t: sink_time_to_rate(self.sink_time_fs),
            sink_target: self.sink_target,
            carrier_detuning: self.carrier_detuning_rad_per_fs,
            ground_coherence_damping: self.ground_coherence_damping,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridConfig {
    pub t_start_fs: f64,
    pub t_end_fs: f64,
    pub dt_fs: f64,
}

impl GridConfig {
    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid::new(self.t_start_fs, self.t_end_fs, self.dt_fs).expect("validated at parse time")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub n_realizations: usize,
    pub base_seed: u64,
    pub convergence_target: Option<f64>,
    pub measure: MeasureOrder,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    /// CSV path, relative to the config file.
    pub csv: Option<String>,
    /// Re-run at half the step and flag deviations above 1e-6.
    pub grid_guard: bool,
}

/// A fully validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub system: SystemConfig,
    pub field: FieldSpec,
    pub grid: GridConfig,
    pub ensemble: Option<EnsembleConfig>,
    pub output: OutputConfig,
}

/// One invalid entry, addressed by its dotted key path.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldIssue>),
}

impl ConfigError {
    pub fn issues(&self) -> &[FieldIssue] {
        match self {
            ConfigError::Invalid(v) => v,
            ConfigError::Parse(_) => &[],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<ScenarioKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<RawSystem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<RawField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<RawGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<RawEnsemble>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<RawOutput>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(skip_serializing_if = "Option::is_none")]
    rabi_frequency_thz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    excited_period_fs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sink_time_fs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sink_target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    carrier_detuning_rad_per_fs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_coherence_damping: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_p_fs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    centers_fs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detuning_rad_per_fs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_d_fs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    carrier_offset_rad_per_fs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_sharing: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(skip_serializing_if = "Option::is_none")]
    t_start_fs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end_fs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt_fs: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    #[serde(skip_serializing_if = "Option::is_none")]
    n_realizations: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    base_seed: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    measure: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_guard: Option<bool>,
}

struct Issues(Vec<FieldIssue>);

impl Issues {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.0.push(FieldIssue { path: path.to_string(), message: message.into() });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0) {
            self.push(path, format!("must be positive, got {v}"));
        }
    }

    fn finite(&mut self, path: &str, v: f64) {
        if !v.is_finite() {
            self.push(path, format!("must be finite, got {v}"));
        }
    }
}

fn enum_value<T: Copy>(issues: &mut Issues, path: &str, raw: &str, options: &[(&str, T)]) -> Option<T> {
    let found = options.iter().find(|(name, _)| name.eq_ignore_ascii_case(raw)).map(|(_, v)| *v);
    if found.is_none() {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        issues.push(path, format!("expected one of {}, got {raw:?}", names.join(", ")));
    }
    found
}

const SINK_TARGETS: [(&str, SinkTarget); 3] =
    [("trap", SinkTarget::Trap), ("ground", SinkTarget::Ground), ("none", SinkTarget::None)];
const DAMPINGS: [(&str, GroundCoherenceDamping); 2] =
    [("half", GroundCoherenceDamping::Half), ("quarter", GroundCoherenceDamping::Quarter)];
const SHARINGS: [(&str, NoiseSharing); 2] = [("shared", NoiseSharing::Shared), ("independent", NoiseSharing::Independent)];
const MEASURES: [(&str, MeasureOrder); 2] = [
    ("average_then_measure", MeasureOrder::AverageThenMeasure),
    ("measure_then_average", MeasureOrder::MeasureThenAverage),
];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> String {
    options.iter().find(|(_, x)| *x == v).map(|(n, _)| n.to_string()).expect("listed")
}

/// Default physics and grid for each scenario.
fn defaults(kind: ScenarioKind) -> RawConfig {
    let (rabi, sink, t0, t1) = match kind {
        ScenarioKind::CoherentPulseTrap => (10.0, 20.0, 0.0, 1000.0),
        ScenarioKind::CwGround => (10.0, 140.0, 0.0, 5000.0),
        ScenarioKind::CwTrap => (10.0, 140.0, 0.0, 6000.0),
        ScenarioKind::NoisyPulseTrap => (0.631, 20.0, -450.0, 1050.0),
        ScenarioKind::NoisyPulseNoTrap => (0.631, f64::INFINITY, -450.0, 1050.0),
    };
    let field = match kind.field_kind() {
        FieldKind::PulseTrain => RawField {
            amplitude: Some(1.0),
            tau_p_fs: Some(10.0),
            centers_fs: Some(vec![250.0, 750.0]),
            ..RawField::default()
        },
        FieldKind::Cw => RawField { amplitude: Some(1.0), detuning_rad_per_fs: Some(0.0), ..RawField::default() },
        FieldKind::Noisy => RawField {
            amplitude: Some(1.0),
            tau_p_fs: Some(100.0),
            centers_fs: Some(vec![50.0, 550.0]),
            tau_d_fs: Some(10.0),
            carrier_offset_rad_per_fs: Some(0.0),
            noise_sharing: Some("shared".into()),
            ..RawField::default()
        },
    };
    RawConfig {
        scenario: Some(kind),
        system: Some(RawSystem {
            rabi_frequency_thz: Some(rabi),
            excited_period_fs: Some(89.0),
            sink_time_fs: Some(sink),
            sink_target: Some(name_of(&SINK_TARGETS, kind.sink_target())),
            carrier_detuning_rad_per_fs: Some(0.0),
            ground_coherence_damping: Some("half".into()),
        }),
        field: Some(field),
        grid: Some(RawGrid { t_start_fs: Some(t0), t_end_fs: Some(t1), dt_fs: None }),
        ensemble: kind.is_noisy().then(|| RawEnsemble {
            n_realizations: Some(vtrap_core::ensemble::DEFAULT_REALIZATIONS as i64),
            base_seed: Some(1),
            convergence_target: None,
            measure: Some("average_then_measure".into()),
        }),
        output: Some(RawOutput { csv: None, grid_guard: Some(true) }),
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    validate_raw(raw)
}

/// The default config of a scenario.
pub fn default_config(kind: ScenarioKind) -> ScenarioConfig {
    validate_raw(RawConfig { scenario: Some(kind), ..RawConfig::default() }).expect("defaults are valid")
}

macro_rules! take {
    ($user:expr, $def:expr, $key:ident) => {
        $user.as_ref().and_then(|u| u.$key.clone()).or_else(|| $def.as_ref().and_then(|d| d.$key.clone()))
    };
}

fn validate_raw(raw: RawConfig) -> Result<ScenarioConfig, ConfigError> {
    let mut issues = Issues(Vec::new());
    let Some(kind) = raw.scenario else {
        issues.push("scenario", "missing; expected one of CoherentPulseTrap, CwGround, CwTrap, NoisyPulseTrap, NoisyPulseNoTrap");
        return Err(ConfigError::Invalid(issues.0));
    };
    let def = defaults(kind);

    // keys that belong to another scenario's field
    if let Some(f) = &raw.field {
        let used: &[&str] = match kind.field_kind() {
            FieldKind::PulseTrain => &["amplitude", "tau_p_fs", "centers_fs"],
            FieldKind::Cw => &["amplitude", "detuning_rad_per_fs"],
            FieldKind::Noisy => &["amplitude", "tau_p_fs", "centers_fs", "tau_d_fs", "carrier_offset_rad_per_fs", "noise_sharing"],
        };
        let present = [
            ("amplitude", f.amplitude.is_some()),
            ("tau_p_fs", f.tau_p_fs.is_some()),
            ("centers_fs", f.centers_fs.is_some()),
            ("detuning_rad_per_fs", f.detuning_rad_per_fs.is_some()),
            ("tau_d_fs", f.tau_d_fs.is_some()),
            ("carrier_offset_rad_per_fs", f.carrier_offset_rad_per_fs.is_some()),
            ("noise_sharing", f.noise_sharing.is_some()),
        ];
        for (key, set) in present {
            if set && !used.contains(&key) {
                issues.push(&format!("field.{key}"), format!("not used by scenario {kind}"));
            }
        }
    }
    if raw.ensemble.is_some() && !kind.is_noisy() {
        issues.push("ensemble", format!("scenario {kind} is deterministic and takes no ensemble section"));
    }

    // system
    let (us, ds) = (&raw.system, &def.system);
    let rabi = take!(us, ds, rabi_frequency_thz).unwrap();
    let period = take!(us, ds, excited_period_fs).unwrap();
    let sink_time = take!(us, ds, sink_time_fs).unwrap();
    let detuning = take!(us, ds, carrier_detuning_rad_per_fs).unwrap();
    issues.positive("system.rabi_frequency_thz", rabi);
    issues.finite("system.rabi_frequency_thz", rabi);
    issues.positive("system.excited_period_fs", period);
    issues.positive("system.sink_time_fs", sink_time);
    issues.finite("system.carrier_detuning_rad_per_fs", detuning);
    let target = take!(us, ds, sink_target)
        .and_then(|s| enum_value(&mut issues, "system.sink_target", &s, &SINK_TARGETS))
        .unwrap_or(kind.sink_target());
    if target != kind.sink_target() {
        issues.push(
            "system.sink_target",
            format!(
                "scenario {kind} requires sink_target = \"{}\", got \"{}\"",
                name_of(&SINK_TARGETS, kind.sink_target()),
                name_of(&SINK_TARGETS, target)
            ),
        );
    }
    if kind.sink_target() == SinkTarget::None && sink_time.is_finite() {
        issues.push("system.sink_time_fs", format!("scenario {kind} has no sink; sink_time_fs must be inf, got {sink_time}"));
    }
    let damping = take!(us, ds, ground_coherence_damping)
        .and_then(|s| enum_value(&mut issues, "system.ground_coherence_damping", &s, &DAMPINGS))
        .unwrap_or_default();
    let system = SystemConfig {
        rabi_frequency_thz: rabi,
        excited_period_fs: period,
        sink_time_fs: sink_time,
        sink_target: kind.sink_target(),
        carrier_detuning_rad_per_fs: detuning,
        ground_coherence_damping: damping,
    };

    // field
    let (uf, df) = (&raw.field, &def.field);
    let amplitude = take!(uf, df, amplitude).unwrap();
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        issues.push("field.amplitude", format!("must be finite and non-negative, got {amplitude}"));
    }
    let pulses = |issues: &mut Issues| {
        let tau_p = take!(uf, df, tau_p_fs).unwrap();
        let centers = take!(uf, df, centers_fs).unwrap();
        issues.positive("field.tau_p_fs", tau_p);
        issues.finite("field.tau_p_fs", tau_p);
        if centers.is_empty() {
            issues.push("field.centers_fs", "needs at least one pulse center");
        } else if centers.iter().any(|c| !c.is_finite()) || centers.windows(2).any(|w| !(w[0] < w[1])) {
            issues.push("field.centers_fs", "must be finite and strictly increasing");
        }
        (tau_p, centers)
    };
    let field = match kind.field_kind() {
        FieldKind::PulseTrain => {
            let (tau_p, centers) = pulses(&mut issues);
            FieldSpec::PulseTrain(PulseTrainSpec { amplitude, tau_p, centers })
        }
        FieldKind::Cw => {
            let detuning = take!(uf, df, detuning_rad_per_fs).unwrap();
            issues.finite("field.detuning_rad_per_fs", detuning);
            FieldSpec::Cw(CwSpec { amplitude, detuning_from_midpoint: detuning })
        }
        FieldKind::Noisy => {
            let (tau_p, centers) = pulses(&mut issues);
            let tau_d = take!(uf, df, tau_d_fs).unwrap();
            issues.positive("field.tau_d_fs", tau_d);
            let offset = take!(uf, df, carrier_offset_rad_per_fs).unwrap();
            issues.finite("field.carrier_offset_rad_per_fs", offset);
            let sharing = take!(uf, df, noise_sharing)
                .and_then(|s| enum_value(&mut issues, "field.noise_sharing", &s, &SHARINGS))
                .unwrap_or_default();
            FieldSpec::NoisyPulse(NoisyPulseSpec { amplitude, tau_p, tau_d, centers, carrier_offset: offset, sharing })
        }
    };

    // ensemble
    let ensemble = if kind.is_noisy() {
        let (ue, de) = (&raw.ensemble, &def.ensemble);
        let n = take!(ue, de, n_realizations).unwrap();
        if n < 2 {
            issues.push("ensemble.n_realizations", format!("must be at least 2, got {n}"));
        }
        let seed = take!(ue, de, base_seed).unwrap();
        if seed < 0 {
            issues.push("ensemble.base_seed", format!("must be non-negative, got {seed}"));
        }
        let target = take!(ue, de, convergence_target);
        if let Some(t) = target {
            issues.positive("ensemble.convergence_target", t);
        }
        let measure = take!(ue, de, measure)
            .and_then(|s| enum_value(&mut issues, "ensemble.measure", &s, &MEASURES))
            .unwrap_or_default();
        Some(EnsembleConfig {
            n_realizations: n.max(0) as usize,
            base_seed: seed.max(0) as u64,
            convergence_target: target,
            measure,
        })
    } else {
        None
    };

    // grid, checked only once the physics is valid
    let (ug, dg) = (&raw.grid, &def.grid);
    let t0 = take!(ug, dg, t_start_fs).unwrap();
    let t1 = take!(ug, dg, t_end_fs).unwrap();
    issues.finite("grid.t_start_fs", t0);
    issues.finite("grid.t_end_fs", t1);
    if !(t1 > t0) {
        issues.push("grid.t_end_fs", format!("must exceed t_start_fs = {t0}, got {t1}"));
    }
    let mut grid = GridConfig { t_start_fs: t0, t_end_fs: t1, dt_fs: f64::NAN };
    if issues.0.is_empty() {
        let params = system.params();
        let cap = params.resolution_cap().min(field.resolution_limit());
        match ug.as_ref().and_then(|g| g.dt_fs) {
            Some(dt) => {
                if !(dt > 0.0) {
                    issues.push("grid.dt_fs", format!("must be positive, got {dt}"));
                } else if dt > cap * (1.0 + 1e-12) {
                    issues.push("grid.dt_fs", format!("{dt} fs exceeds the resolution cap {cap} fs"));
                } else if let Err(e) = TimeGrid::new(t0, t1, dt) {
                    issues.push("grid.dt_fs", e.to_string());
                } else {
                    grid.dt_fs = dt;
                }
            }
            None => {
                let tg = TimeGrid::covering(t0, t1, recommended_step(&params, &field)).expect("checked span");
                grid.dt_fs = tg.dt;
            }
        }
        if let FieldSpec::PulseTrain(PulseTrainSpec { tau_p, centers, .. })
        | FieldSpec::NoisyPulse(NoisyPulseSpec { tau_p, centers, .. }) = &field
        {
            let need0 = centers[0] - vtrap_core::fields::COVERAGE_WIDTHS * tau_p;
            let need1 = centers[centers.len() - 1] + vtrap_core::fields::COVERAGE_WIDTHS * tau_p;
            if t0 > need0 {
                issues.push("grid.t_start_fs", format!("must be at most {need0} to cover the first pulse"));
            }
            if t1 < need1 {
                issues.push("grid.t_end_fs", format!("must be at least {need1} to cover the last pulse"));
            }
        }
    }

    let (uo, do_) = (&raw.output, &def.output);
    let output = OutputConfig { csv: take!(uo, do_, csv), grid_guard: take!(uo, do_, grid_guard).unwrap_or(true) };

    if issues.0.is_empty() {
        Ok(ScenarioConfig { scenario: kind, system, field, grid, ensemble, output })
    } else {
        Err(ConfigError::Invalid(issues.0))
    }
}

/// Renders a config with every key explicit. `parse_config` inverts it.
pub fn render_config(config: &ScenarioConfig) -> String {
    let s = &config.system;
    let field = match &config.field {
        FieldSpec::PulseTrain(p) => RawField {
            amplitude: Some(p.amplitude),
            tau_p_fs: Some(p.tau_p),
            centers_fs: Some(p.centers.clone()),
            ..RawField::default()
        },
        FieldSpec::Cw(c) => RawField {
            amplitude: Some(c.amplitude),
            detuning_rad_per_fs: Some(c.detuning_from_midpoint),
            ..RawField::default()
        },
        FieldSpec::NoisyPulse(n) => RawField {
            amplitude: Some(n.amplitude),
            tau_p_fs: Some(n.tau_p),
            centers_fs: Some(n.centers.clone()),
            tau_d_fs: Some(n.tau_d),
            carrier_offset_rad_per_fs: Some(n.carrier_offset),
            noise_sharing: Some(name_of(&SHARINGS, n.sharing)),
            ..RawField::default()
        },
    };
    let raw = RawConfig {
        scenario: Some(config.scenario),
        system: Some(RawSystem {
            rabi_frequency_thz: Some(s.rabi_frequency_thz),
            excited_period_fs: Some(s.excited_period_fs),
            sink_time_fs: Some(s.sink_time_fs),
            sink_target: Some(name_of(&SINK_TARGETS, s.sink_target)),
            carrier_detuning_rad_per_fs: Some(s.carrier_detuning_rad_per_fs),
            ground_coherence_damping: Some(name_of(&DAMPINGS, s.ground_coherence_damping)),
        }),
        field: Some(field),
        grid: Some(RawGrid {
            t_start_fs: Some(config.grid.t_start_fs),
            t_end_fs: Some(config.grid.t_end_fs),
            dt_fs: Some(config.grid.dt_fs),
        }),
        ensemble: config.ensemble.as_ref().map(|e| RawEnsemble {
            n_realizations: Some(e.n_realizations as i64),
            base_seed: Some(e.base_seed as i64),
            convergence_target: e.convergence_target,
            measure: Some(name_of(&MEASURES, e.measure)),
        }),
        output: Some(RawOutput { csv: config.output.csv.clone(), grid_guard: Some(config.output.grid_guard) }),
    };
    toml::to_string(&raw).expect("plain data renders")
}

impl FromStr for ScenarioConfig {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_config(s)
    }
}

impl ScenarioConfig {
    pub fn params(&self) -> SystemParams {
        self.system.params()
    }

    pub fn time_grid(&self) -> TimeGrid {
        self.grid.time_grid()
    }

    /// Returns a copy with the excited-state period and sink time replaced and
    /// the step re-derived from the new resolution cap.
    pub fn with_timescales(&self, excited_period_fs: f64, sink_time_fs: f64) -> ScenarioConfig {
        let mut c = self.clone();
        c.system.excited_period_fs = excited_period_fs;
        c.system.sink_time_fs = sink_time_fs;
        c.rederive_step();
        c
    }

    /// Resets the step to the default for the current physics.
    pub fn rederive_step(&mut self) {
        let dt = recommended_step(&self.params(), &self.field);
        self.grid.dt_fs = TimeGrid::covering(self.grid.t_start_fs, self.grid.t_end_fs, dt).expect("valid span").dt;
    }
}
