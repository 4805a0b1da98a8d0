//! Domain types, parameter validation and scenario documents.
//!
//! A scenario is a TOML document with a versioned schema; unknown keys are
//! rejected so a typo'd physics parameter can never be silently ignored.
//! All types here are immutable after construction and safe to share.

use crate::sim::LeaderProfile;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Version of the scenario document schema this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Relative tolerance for the "delay is an integer number of samples" check.
pub const DELAY_ALIGNMENT_TOL: f64 = 1e-12;

/// Per-vehicle physical constants plus the spacing policy.
///
/// `length` and `standstill_gap` cancel out of the error dynamics; they
/// only shift absolute positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Driveline time constant τ, seconds.
    pub tau: f64,
    /// Actuation delay φ, seconds.
    pub phi: f64,
    /// Vehicle length L, meters.
    pub length: f64,
    /// Desired headway h, seconds.
    pub headway: f64,
    /// Standstill gap r, meters.
    pub standstill_gap: f64,
}

/// Controller gains of the delay-free design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    /// Proportional gain, 1/s².
    pub kp: f64,
    /// Derivative gain, 1/s.
    pub kd: f64,
}

/// Controller sampling time and the actuation delay expressed in samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    /// Sampling time, seconds.
    pub ts: f64,
    /// Delay in samples; `d * ts` equals the vehicle's φ exactly.
    pub d: usize,
}

impl Timing {
    /// Derives the delay-in-samples from a physical delay. Fails unless φ
    /// is a nonnegative integer multiple of `ts` (to 1e-12 relative).
    pub fn from_phi(phi: f64, ts: f64) -> Result<Timing, Violation> {
        if !(ts > 0.0) || !ts.is_finite() {
            return Err(Violation::new("timing", "ts must be positive"));
        }
        if !(phi >= 0.0) || !phi.is_finite() {
            return Err(Violation::new("timing", "phi must be nonnegative"));
        }
        let d = (phi / ts).round();
        if (d * ts - phi).abs() > DELAY_ALIGNMENT_TOL * phi.max(ts) {
            return Err(Violation::new(
                "timing",
                "phi not an integer multiple of ts",
            ));
        }
        Ok(Timing { ts, d: d as usize })
    }

    /// The physical delay d·ts reconstructed from the sample count.
    pub fn phi(&self) -> f64 {
        self.d as f64 * self.ts
    }
}

/// Raw longitudinal state of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    /// Rear-bumper position, meters.
    pub q: f64,
    /// Velocity, m/s.
    pub v: f64,
    /// Acceleration, m/s².
    pub a: f64,
}

/// Transformed error coordinates of one follower.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorState {
    /// Spacing error, meters.
    pub x1: f64,
    /// Spacing-error rate, m/s.
    pub x2: f64,
    /// Velocity difference to the predecessor, m/s.
    pub x3: f64,
}

/// Which control law a follower runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    /// Delay-compensating predictor feedback.
    Predictor,
    /// The delay-free design applied as-is.
    Conventional,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerKind::Predictor => write!(f, "predictor"),
            ControllerKind::Conventional => write!(f, "conventional"),
        }
    }
}

fn default_length() -> f64 {
    4.0
}

fn default_gap() -> f64 {
    2.0
}

fn default_controller() -> ControllerKind {
    ControllerKind::Predictor
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}

fn default_true() -> bool {
    true
}

/// One vehicle row of a scenario document. Vehicle 0 is the leader and
/// ignores the controller-related fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleEntry {
    pub tau: f64,
    pub phi: f64,
    #[serde(default = "default_length")]
    pub length: f64,
    pub headway: f64,
    #[serde(default = "default_gap")]
    pub standstill_gap: f64,
    /// Proportional gain; required (> 0) for followers.
    #[serde(default)]
    pub kp: f64,
    /// Derivative gain; required (> 0) for followers.
    #[serde(default)]
    pub kd: f64,
    #[serde(default = "default_controller")]
    pub controller: ControllerKind,
    /// Initial spacing error e0, meters; realized as a position offset.
    #[serde(default)]
    pub initial_error: f64,
    /// Constant pre-history for the input buffers (vehicle at rest with
    /// this input already in flight). Defaults to a quiescent history.
    #[serde(default)]
    pub initial_input: f64,
}

impl VehicleEntry {
    pub fn params(&self) -> VehicleParams {
        VehicleParams {
            tau: self.tau,
            phi: self.phi,
            length: self.length,
            headway: self.headway,
            standstill_gap: self.standstill_gap,
        }
    }

    pub fn gains(&self) -> GainSet {
        GainSet {
            kp: self.kp,
            kd: self.kd,
        }
    }
}

/// Mid-run change of one follower's standstill gap; takes effect at the
/// first sample at or after `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapChangeEvent {
    pub time: f64,
    pub vehicle: usize,
    pub standstill_gap: f64,
}

/// Output knobs of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    /// Include the per-follower controller-internal columns (predicted
    /// acceleration and virtual input) in CSV logs.
    #[serde(default = "default_true")]
    pub controller_columns: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions {
            controller_columns: true,
        }
    }
}

/// A fully parsed scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Controller sampling time, seconds (single global value).
    pub ts: f64,
    /// Simulated duration, seconds.
    pub duration: f64,
    pub leader_profile: LeaderProfile,
    /// Ordered vehicle list; index 0 is the leader.
    pub vehicles: Vec<VehicleEntry>,
    #[serde(default)]
    pub events: Vec<GapChangeEvent>,
    #[serde(default)]
    pub output: OutputOptions,
}

impl ScenarioConfig {
    /// Sampling/delay bookkeeping for follower `i` (panics if the config
    /// was not validated first).
    pub fn follower_timing(&self, i: usize) -> Timing {
        Timing::from_phi(self.vehicles[i].phi, self.ts).expect("validated config")
    }

    pub fn serialize_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialization cannot fail")
    }
}

/// One violated invariant, with the scope it was found in.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub context: String,
    pub message: String,
}

impl Violation {
    pub fn new(context: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            context: context.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.context, self.message)
    }
}

/// Errors from loading a scenario document.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// The document is not well-formed (message includes the location).
    Parse(String),
    /// The document parsed but violates invariants.
    Invalid(Vec<Violation>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(msg) => write!(f, "scenario parse error: {}", msg),
            ConfigError::Invalid(violations) => {
                writeln!(f, "invalid scenario ({} violation(s)):", violations.len())?;
                for v in violations {
                    writeln!(f, "  - {}", v)?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Checks every invariant of a scenario and returns the violations found;
/// an empty list means the config is valid. Violations are data, not
/// failures.
pub fn validate_params(cfg: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();

    if cfg.version != SCHEMA_VERSION {
        out.push(Violation::new(
            "scenario",
            format!(
                "unsupported schema version {} (expected {})",
                cfg.version, SCHEMA_VERSION
            ),
        ));
    }
    if !(cfg.ts > 0.0) || !cfg.ts.is_finite() {
        out.push(Violation::new("scenario", "ts must be positive"));
    }
    if !(cfg.duration > 0.0) || !cfg.duration.is_finite() {
        out.push(Violation::new("scenario", "duration must be positive"));
    }
    if cfg.vehicles.len() < 2 {
        out.push(Violation::new(
            "scenario",
            "at least 2 vehicles required (leader plus one follower)",
        ));
    }

    cfg.leader_profile.validate("leader_profile", &mut out);

    for (i, v) in cfg.vehicles.iter().enumerate() {
        let ctx = format!("vehicles[{}]", i);
        let fields = [
            v.tau,
            v.phi,
            v.length,
            v.headway,
            v.standstill_gap,
            v.kp,
            v.kd,
            v.initial_error,
            v.initial_input,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            out.push(Violation::new(ctx, "all parameters must be finite"));
            continue;
        }
        if !(v.tau > 0.0) {
            out.push(Violation::new(&ctx, "tau must be positive"));
        }
        if v.phi < 0.0 {
            out.push(Violation::new(&ctx, "phi must be nonnegative"));
        }
        if !(v.headway > 0.0) {
            out.push(Violation::new(&ctx, "headway must be positive"));
        }
        if v.standstill_gap < 0.0 {
            out.push(Violation::new(&ctx, "standstill_gap must be nonnegative"));
        }
        if v.length < 0.0 {
            out.push(Violation::new(&ctx, "length must be nonnegative"));
        }
        if i == 0 {
            continue; // controller fields are ignored on the leader
        }
        if !(v.kp > 0.0) {
            out.push(Violation::new(&ctx, "kp must be positive"));
        }
        if !(v.kd > 0.0) {
            out.push(Violation::new(&ctx, "kd must be positive"));
        }
        if cfg.ts > 0.0 && v.phi >= 0.0 {
            if let Err(violation) = Timing::from_phi(v.phi, cfg.ts) {
                out.push(Violation::new(&ctx, violation.message));
            }
        }
    }

    for (i, ev) in cfg.events.iter().enumerate() {
        let ctx = format!("events[{}]", i);
        if !ev.time.is_finite() || ev.time < 0.0 || (cfg.duration > 0.0 && ev.time > cfg.duration) {
            out.push(Violation::new(&ctx, "time must lie within [0, duration]"));
        }
        if ev.vehicle == 0 || ev.vehicle >= cfg.vehicles.len() {
            out.push(Violation::new(&ctx, "vehicle must index a follower"));
        }
        if !ev.standstill_gap.is_finite() || ev.standstill_gap < 0.0 {
            out.push(Violation::new(&ctx, "standstill_gap must be nonnegative"));
        }
    }

    out
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let violations = validate_params(&cfg);
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

/// Two-vehicle scenario at the reference experiment's parameters; shared
/// by tests across the crate.
#[cfg(test)]
pub(crate) const PAPER_DOC: &str = r#"
ts = 0.01
duration = 20.0

[leader_profile]
kind = "standstill"

[[vehicles]]
tau = 0.067
phi = 0.15
headway = 0.5

[[vehicles]]
tau = 0.067
phi = 0.15
headway = 0.5
kp = 0.2
kd = 0.6866
controller = "predictor"
initial_error = 1.0
"#;
