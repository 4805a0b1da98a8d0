//! Platoon simulation lab: leader profiles, the coordinate transform, the
//! multi-vehicle sampled simulation, continuous reference simulations of
//! the two closed loops, response metrics and CSV logging.
//!
//! The sampled simulation is exact: plants propagate by closed-form ZOH
//! transitions and the leader's acceleration is held constant within each
//! sample, so the logged error states reproduce the lifted closed-loop
//! recursion to floating-point accumulation. The continuous reference
//! simulations instead integrate at a fine fixed step for fidelity to the
//! underlying differential equations.

use crate::config::{
    validate_params, ControllerKind, ErrorState, GainSet, ScenarioConfig, Timing, VehicleParams,
    VehicleState, Violation,
};
use crate::controller::{conventional_control, ControlOutput, Measurement, PredictorState};
use crate::plant::{DelayBuffer, PlantPropagator};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{self, Write};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Named leader acceleration profile; `a0(t)` is zero before `start` and
/// bounded by `amplitude` everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderProfile {
    pub kind: ProfileKind,
    /// Peak acceleration, m/s².
    #[serde(default)]
    pub amplitude: f64,
    /// Profile onset time, s.
    #[serde(default)]
    pub start: f64,
    /// Ramp duration of the trapezoid, s.
    #[serde(default)]
    pub ramp: f64,
    /// Plateau duration of the trapezoid, s.
    #[serde(default)]
    pub hold: f64,
    /// End of the step, s (open-ended when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    /// Sine frequency, Hz.
    #[serde(default)]
    pub frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Standstill,
    Step,
    Trapezoid,
    Sine,
}

impl LeaderProfile {
    pub fn standstill() -> Self {
        LeaderProfile {
            kind: ProfileKind::Standstill,
            amplitude: 0.0,
            start: 0.0,
            ramp: 0.0,
            hold: 0.0,
            stop: None,
            frequency: 0.0,
        }
    }

    pub fn step(amplitude: f64, start: f64, stop: Option<f64>) -> Self {
        LeaderProfile {
            kind: ProfileKind::Step,
            amplitude,
            start,
            stop,
            ..Self::standstill()
        }
    }

    pub fn trapezoid(amplitude: f64, start: f64, ramp: f64, hold: f64) -> Self {
        LeaderProfile {
            kind: ProfileKind::Trapezoid,
            amplitude,
            start,
            ramp,
            hold,
            ..Self::standstill()
        }
    }

    pub fn sine(amplitude: f64, frequency: f64, start: f64) -> Self {
        LeaderProfile {
            kind: ProfileKind::Sine,
            amplitude,
            frequency,
            start,
            ..Self::standstill()
        }
    }

    /// Leader acceleration at time `t` (zero for `t < start`).
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.start {
            return 0.0;
        }
        match self.kind {
            ProfileKind::Standstill => 0.0,
            ProfileKind::Step => match self.stop {
                Some(stop) if t >= stop => 0.0,
                _ => self.amplitude,
            },
            ProfileKind::Trapezoid => {
                let rel = t - self.start;
                if rel < self.ramp {
                    if self.ramp == 0.0 {
                        self.amplitude
                    } else {
                        self.amplitude * rel / self.ramp
                    }
                } else if rel < self.ramp + self.hold {
                    self.amplitude
                } else if rel < 2.0 * self.ramp + self.hold {
                    if self.ramp == 0.0 {
                        0.0
                    } else {
                        self.amplitude * (2.0 * self.ramp + self.hold - rel) / self.ramp
                    }
                } else {
                    0.0
                }
            }
            ProfileKind::Sine => {
                self.amplitude * (TWO_PI * self.frequency * (t - self.start)).sin()
            }
        }
    }

    /// Time after which the profile is identically zero; `None` for
    /// profiles that never end (sine) or never start (standstill).
    pub fn end_time(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::Standstill => Some(0.0),
            ProfileKind::Step => self.stop,
            ProfileKind::Trapezoid => Some(self.start + 2.0 * self.ramp + self.hold),
            ProfileKind::Sine => None,
        }
    }

    pub(crate) fn validate(&self, ctx: &str, out: &mut Vec<Violation>) {
        let fields = [
            self.amplitude,
            self.start,
            self.ramp,
            self.hold,
            self.frequency,
        ];
        if fields.iter().any(|x| !x.is_finite()) || self.stop.is_some_and(|s| !s.is_finite()) {
            out.push(Violation::new(ctx, "all profile parameters must be finite"));
            return;
        }
        if self.start < 0.0 {
            out.push(Violation::new(ctx, "start must be nonnegative"));
        }
        match self.kind {
            ProfileKind::Trapezoid => {
                if self.ramp < 0.0 || self.hold < 0.0 {
                    out.push(Violation::new(ctx, "ramp and hold must be nonnegative"));
                }
            }
            ProfileKind::Sine => {
                if self.frequency < 0.0 {
                    out.push(Violation::new(ctx, "frequency must be nonnegative"));
                }
            }
            ProfileKind::Step => {
                if let Some(stop) = self.stop {
                    if stop < self.start {
                        out.push(Violation::new(ctx, "stop must not precede start"));
                    }
                }
            }
            ProfileKind::Standstill => {}
        }
    }
}

/// Sampled trajectory record of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesLog {
    pub ts: f64,
    pub time: Vec<f64>,
    pub vehicles: Vec<VehicleLog>,
    /// Whether CSV output includes the controller-internal columns.
    pub controller_columns: bool,
}

/// Per-vehicle sampled signals; `errors` is present for followers only.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VehicleLog {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub u_cmd: Vec<f64>,
    pub u_applied: Vec<f64>,
    pub errors: Option<FollowerLog>,
}

/// Follower-only signals: transformed errors and controller internals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FollowerLog {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
    pub a_hat: Vec<f64>,
    pub u_bar: Vec<f64>,
}

impl TimeSeriesLog {
    /// Number of samples (rows).
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Writes the log as CSV: one header row, 15 significant digits,
    /// deterministic column order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t");
        for (i, veh) in self.vehicles.iter().enumerate() {
            for col in ["q", "v", "a", "u_cmd", "u_applied"] {
                header.push_str(&format!(",veh{}_{}", i, col));
            }
            if veh.errors.is_some() {
                for col in ["x1", "x2", "x3"] {
                    header.push_str(&format!(",veh{}_{}", i, col));
                }
                if self.controller_columns {
                    for col in ["a_hat", "u_bar"] {
                        header.push_str(&format!(",veh{}_{}", i, col));
                    }
                }
            }
        }
        writeln!(w, "{}", header)?;
        for k in 0..self.len() {
            let mut line = format!("{:.14e}", self.time[k]);
            for veh in &self.vehicles {
                for series in [&veh.q, &veh.v, &veh.a, &veh.u_cmd, &veh.u_applied] {
                    line.push_str(&format!(",{:.14e}", series[k]));
                }
                if let Some(err) = &veh.errors {
                    for series in [&err.x1, &err.x2, &err.x3] {
                        line.push_str(&format!(",{:.14e}", series[k]));
                    }
                    if self.controller_columns {
                        for series in [&err.a_hat, &err.u_bar] {
                            line.push_str(&format!(",{:.14e}", series[k]));
                        }
                    }
                }
            }
            writeln!(w, "{}", line)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Simulation failures.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    InvalidConfig(Vec<Violation>),
    /// A state or control signal left the finite range.
    NonFinite {
        time: f64,
        vehicle: usize,
    },
    /// The reference integrator requires the delay to sit on its grid.
    FractionalDelay {
        phi: f64,
        ts_fine: f64,
    },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidConfig(v) => {
                writeln!(f, "invalid configuration ({} violation(s)):", v.len())?;
                for violation in v {
                    writeln!(f, "  - {}", violation)?;
                }
                Ok(())
            }
            SimError::NonFinite { time, vehicle } => {
                write!(
                    f,
                    "numerical overflow at t = {} s in vehicle {}",
                    time, vehicle
                )
            }
            SimError::FractionalDelay { phi, ts_fine } => {
                write!(
                    f,
                    "delay {} s is not an integer multiple of the fine step {} s",
                    phi, ts_fine
                )
            }
        }
    }
}

impl std::error::Error for SimError {}

/// Transformed follower coordinates from raw predecessor/ego states:
/// spacing error, its rate, and the velocity difference.
pub fn error_transform(
    lead: &VehicleState,
    ego: &VehicleState,
    params: &VehicleParams,
) -> ErrorState {
    ErrorState {
        x1: (lead.q - ego.q - params.length) - params.headway * ego.v - params.standstill_gap,
        x2: lead.v - ego.v - params.headway * ego.a,
        x3: lead.v - ego.v,
    }
}

enum Law {
    Predictor(PredictorState),
    Conventional {
        gains: GainSet,
        tau: f64,
        headway: f64,
    },
}

impl Law {
    fn step(&mut self, m: &Measurement) -> ControlOutput {
        match self {
            Law::Predictor(ps) => ps.step(m),
            Law::Conventional {
                gains,
                tau,
                headway,
            } => {
                let u = conventional_control(*gains, *tau, *headway, m);
                // the conventional law is the d = 0 degenerate of the
                // predictor; log the same internal quantities
                let u_bar = -(gains.kp * m.x1 + gains.kd * m.x2);
                ControlOutput {
                    u,
                    u_bar,
                    a_hat: m.a_self,
                    x_hat: (m.x1, m.x2),
                }
            }
        }
    }
}

struct FollowerRig {
    plant: PlantPropagator,
    delay: DelayBuffer,
    law: Law,
}

fn build_rig(
    entry_params: VehicleParams,
    gains: GainSet,
    kind: ControllerKind,
    timing: Timing,
    initial_input: f64,
) -> FollowerRig {
    let plant = PlantPropagator::new(entry_params.tau, timing.ts).expect("validated params");
    let delay = DelayBuffer::filled(timing.d, initial_input);
    let law = match kind {
        ControllerKind::Predictor => Law::Predictor(
            PredictorState::new(gains, timing, entry_params.tau, entry_params.headway)
                .with_initial_input(initial_input),
        ),
        ControllerKind::Conventional => Law::Conventional {
            gains,
            tau: entry_params.tau,
            headway: entry_params.headway,
        },
    };
    FollowerRig { plant, delay, law }
}

/// Runs the full sampled platoon simulation described by a scenario.
///
/// Per sample: the leader profile is evaluated (and held), every follower
/// computes its control from the current states, commands pass through the
/// dead-time buffers, and all vehicles propagate exactly one sample.
/// Initial conditions realize x(0) = [e0, 0, 0] per follower by offsetting
/// the initial positions.
pub fn run_platoon_sim(cfg: &ScenarioConfig) -> Result<TimeSeriesLog, SimError> {
    let violations = validate_params(cfg);
    if !violations.is_empty() {
        return Err(SimError::InvalidConfig(violations));
    }
    let ts = cfg.ts;
    let steps = (cfg.duration / ts).round() as usize;
    let n = cfg.vehicles.len();

    let mut params: Vec<VehicleParams> = cfg.vehicles.iter().map(|v| v.params()).collect();
    let mut states: Vec<VehicleState> = Vec::with_capacity(n);
    states.push(VehicleState::default());
    for i in 1..n {
        let e = &cfg.vehicles[i];
        states.push(VehicleState {
            q: states[i - 1].q - e.length - e.standstill_gap - e.initial_error,
            v: 0.0,
            a: 0.0,
        });
    }

    let mut rigs: Vec<FollowerRig> = Vec::with_capacity(n - 1);
    for i in 1..n {
        let e = &cfg.vehicles[i];
        let timing = cfg.follower_timing(i);
        rigs.push(build_rig(
            e.params(),
            e.gains(),
            e.controller,
            timing,
            e.initial_input,
        ));
    }

    let mut events: Vec<_> = cfg.events.iter().collect();
    events.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("validated event times"));
    let mut next_event = 0;

    let mut log = TimeSeriesLog {
        ts,
        time: Vec::with_capacity(steps + 1),
        vehicles: (0..n)
            .map(|i| VehicleLog {
                errors: if i == 0 {
                    None
                } else {
                    Some(FollowerLog::default())
                },
                ..VehicleLog::default()
            })
            .collect(),
        controller_columns: cfg.output.controller_columns,
    };

    let mut u_applied = vec![0.0_f64; n];
    for k in 0..=steps {
        let t = k as f64 * ts;
        while next_event < events.len() && events[next_event].time <= t + 1e-9 * ts {
            params[events[next_event].vehicle].standstill_gap = events[next_event].standstill_gap;
            next_event += 1;
        }

        let a0 = cfg.leader_profile.eval(t);
        states[0].a = a0;
        u_applied[0] = a0;

        log.time.push(t);
        for i in 1..n {
            let lead = states[i - 1];
            let ego = states[i];
            let es = error_transform(&lead, &ego, &params[i]);
            let m = Measurement {
                x1: es.x1,
                x2: es.x2,
                a_self: ego.a,
                a_lead: lead.a,
            };
            let out = rigs[i - 1].law.step(&m);
            u_applied[i] = rigs[i - 1].delay.push(out.u);

            let veh = &mut log.vehicles[i];
            veh.u_cmd.push(out.u);
            veh.u_applied.push(u_applied[i]);
            let err = veh.errors.as_mut().expect("follower log");
            err.x1.push(es.x1);
            err.x2.push(es.x2);
            err.x3.push(es.x3);
            err.a_hat.push(out.a_hat);
            err.u_bar.push(out.u_bar);

            if !(out.u.is_finite() && es.x1.is_finite() && es.x2.is_finite() && es.x3.is_finite()) {
                return Err(SimError::NonFinite {
                    time: t,
                    vehicle: i,
                });
            }
        }
        for (i, (veh, state)) in log.vehicles.iter_mut().zip(&states).enumerate() {
            veh.q.push(state.q);
            veh.v.push(state.v);
            veh.a.push(state.a);
            if i == 0 {
                veh.u_cmd.push(a0);
                veh.u_applied.push(a0);
            }
            if !(state.q.is_finite() && state.v.is_finite() && state.a.is_finite()) {
                return Err(SimError::NonFinite {
                    time: t,
                    vehicle: i,
                });
            }
        }

        if k < steps {
            // leader: exact motion under its held acceleration
            states[0].q += states[0].v * ts + 0.5 * a0 * ts * ts;
            states[0].v += a0 * ts;
            for i in 1..n {
                states[i] = rigs[i - 1].plant.step(states[i], u_applied[i]);
            }
        }
    }

    Ok(log)
}

/// Re-runs a single follower against a recorded predecessor trajectory.
///
/// The follower's closed loop consumes only the predecessor's sampled
/// (q, v, a) signals, so replaying a recorded predecessor must reproduce
/// the follower's log exactly — the response is independent of the
/// predecessor's driveline.
pub fn replay_follower(
    entry: &crate::config::VehicleEntry,
    ts: f64,
    predecessor: &VehicleLog,
) -> Result<VehicleLog, SimError> {
    let timing = Timing::from_phi(entry.phi, ts).map_err(|v| SimError::InvalidConfig(vec![v]))?;
    if !(entry.tau > 0.0) || !(entry.headway > 0.0) || !(ts > 0.0) {
        return Err(SimError::InvalidConfig(vec![Violation::new(
            "replay",
            "tau, headway and ts must be positive",
        )]));
    }
    let samples = predecessor.q.len();
    let params = entry.params();
    let mut rig = build_rig(
        params,
        entry.gains(),
        entry.controller,
        timing,
        entry.initial_input,
    );
    let mut state = VehicleState {
        q: predecessor.q[0] - entry.length - entry.standstill_gap - entry.initial_error,
        v: 0.0,
        a: 0.0,
    };

    let mut veh = VehicleLog {
        errors: Some(FollowerLog::default()),
        ..VehicleLog::default()
    };
    for k in 0..samples {
        let lead = VehicleState {
            q: predecessor.q[k],
            v: predecessor.v[k],
            a: predecessor.a[k],
        };
        let es = error_transform(&lead, &state, &params);
        let m = Measurement {
            x1: es.x1,
            x2: es.x2,
            a_self: state.a,
            a_lead: lead.a,
        };
        let out = rig.law.step(&m);
        let u_applied = rig.delay.push(out.u);

        veh.q.push(state.q);
        veh.v.push(state.v);
        veh.a.push(state.a);
        veh.u_cmd.push(out.u);
        veh.u_applied.push(u_applied);
        let err = veh.errors.as_mut().expect("follower log");
        err.x1.push(es.x1);
        err.x2.push(es.x2);
        err.x3.push(es.x3);
        err.a_hat.push(out.a_hat);
        err.u_bar.push(out.u_bar);

        if !(out.u.is_finite() && state.q.is_finite()) {
            return Err(SimError::NonFinite {
                time: k as f64 * ts,
                vehicle: 1,
            });
        }
        if k + 1 < samples {
            state = rig.plant.step(state, u_applied);
        }
    }
    Ok(veh)
}

/// Which continuous closed loop to integrate as a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceModel {
    /// Ideal predictor-compensated loop: delay-free error dynamics driven
    /// by the predecessor's current and delayed acceleration.
    Predictor,
    /// The delay-free design running against the uncompensated dead time:
    /// a delay-differential equation in the error coordinates.
    Conventional,
}

/// Trajectory of a continuous reference simulation, sampled at the fine
/// integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLog {
    pub ts: f64,
    pub time: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
}

/// Largest |value| of a signal and the time it first occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalPeak {
    pub value: f64,
    pub time: f64,
}

fn peak_abs(time: &[f64], series: &[f64]) -> SignalPeak {
    let mut peak = SignalPeak {
        value: 0.0,
        time: 0.0,
    };
    for (t, x) in time.iter().zip(series) {
        if x.abs() > peak.value {
            peak = SignalPeak {
                value: x.abs(),
                time: *t,
            };
        }
    }
    peak
}

impl ReferenceLog {
    pub fn peak_abs_x1(&self) -> SignalPeak {
        peak_abs(&self.time, &self.x1)
    }

    pub fn peak_abs_x3(&self) -> SignalPeak {
        peak_abs(&self.time, &self.x3)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x1,x2,x3")?;
        for k in 0..self.time.len() {
            writeln!(
                w,
                "{:.14e},{:.14e},{:.14e},{:.14e}",
                self.time[k], self.x1[k], self.x2[k], self.x3[k]
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Fixed-step integration of one of the two continuous closed loops from
/// x(0) = [e0, 0, 0], with the leader profile as the exogenous input.
///
/// The predictor loop is an ODE integrated by classic RK4. The
/// conventional loop is a delay-differential equation integrated by RK4
/// over a stored history; delayed mid-step states come from cubic Hermite
/// interpolation, and the delay must sit on the fine grid. History before
/// t = 0 is zero (controller activated on a quiescent system).
pub fn run_reference_sim(
    model: ReferenceModel,
    params: &VehicleParams,
    gains: GainSet,
    e0: f64,
    profile: &LeaderProfile,
    duration: f64,
    ts_fine: f64,
) -> Result<ReferenceLog, SimError> {
    if !(ts_fine > 0.0) || !(duration > 0.0) {
        return Err(SimError::InvalidConfig(vec![Violation::new(
            "reference",
            "duration and ts_fine must be positive",
        )]));
    }
    let h = params.headway;
    let tau = params.tau;
    let phi = params.phi;
    let steps = (duration / ts_fine).round() as usize;

    match model {
        ReferenceModel::Predictor => {
            // ẋ = A x + [0; a0(t) - a0(t-φ); a0(t)]
            let a = [
                [0.0, 1.0, 0.0],
                [-gains.kp, -gains.kd, 0.0],
                [0.0, 1.0 / h, -1.0 / h],
            ];
            let f = |t: f64, x: &[f64; 3]| -> [f64; 3] {
                let now = profile.eval(t);
                let delayed = if t - phi < 0.0 {
                    0.0
                } else {
                    profile.eval(t - phi)
                };
                [
                    a[0][0] * x[0] + a[0][1] * x[1] + a[0][2] * x[2],
                    a[1][0] * x[0] + a[1][1] * x[1] + a[1][2] * x[2] + (now - delayed),
                    a[2][0] * x[0] + a[2][1] * x[1] + a[2][2] * x[2] + now,
                ]
            };
            Ok(integrate_ode(f, e0, steps, ts_fine))
        }
        ReferenceModel::Conventional => {
            let m_delay = (phi / ts_fine).round();
            if (m_delay * ts_fine - phi).abs() > 1e-9 * phi.max(ts_fine) {
                return Err(SimError::FractionalDelay { phi, ts_fine });
            }
            let m_delay = m_delay as usize;
            let es = crate::stability::build_error_system(tau, h, gains).map_err(|_| {
                SimError::InvalidConfig(vec![Violation::new("reference", "invalid parameters")])
            })?;
            let a0m = &es.a0;
            let a1m = &es.a1;
            if m_delay == 0 {
                // degenerate: the delayed argument is the current state and
                // the delayed-acceleration difference vanishes
                let comb = a0m.add(a1m);
                let f = |t: f64, x: &[f64; 3]| -> [f64; 3] {
                    let now = profile.eval(t);
                    let y = comb.matvec(&x[..]);
                    [y[0], y[1], y[2] + now]
                };
                return Ok(integrate_ode(f, e0, steps, ts_fine));
            }
            Ok(integrate_dde(
                a0m, a1m, profile, phi, e0, steps, ts_fine, m_delay,
            ))
        }
    }
}

fn integrate_ode<F: Fn(f64, &[f64; 3]) -> [f64; 3]>(
    f: F,
    e0: f64,
    steps: usize,
    h: f64,
) -> ReferenceLog {
    let mut log = ReferenceLog {
        ts: h,
        time: Vec::with_capacity(steps + 1),
        x1: Vec::with_capacity(steps + 1),
        x2: Vec::with_capacity(steps + 1),
        x3: Vec::with_capacity(steps + 1),
    };
    let mut x = [e0, 0.0, 0.0];
    for n in 0..=steps {
        let t = n as f64 * h;
        log.time.push(t);
        log.x1.push(x[0]);
        log.x2.push(x[1]);
        log.x3.push(x[2]);
        if n == steps {
            break;
        }
        let k1 = f(t, &x);
        let k2 = f(t + h / 2.0, &add_scaled(&x, &k1, h / 2.0));
        let k3 = f(t + h / 2.0, &add_scaled(&x, &k2, h / 2.0));
        let k4 = f(t + h, &add_scaled(&x, &k3, h));
        for i in 0..3 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    log
}

#[allow(clippy::too_many_arguments)]
fn integrate_dde(
    a0m: &crate::numerics::Matrix,
    a1m: &crate::numerics::Matrix,
    profile: &LeaderProfile,
    phi: f64,
    e0: f64,
    steps: usize,
    h: f64,
    m_delay: usize,
) -> ReferenceLog {
    let mut xs: Vec<[f64; 3]> = Vec::with_capacity(steps + 1);
    let mut fs: Vec<[f64; 3]> = Vec::with_capacity(steps + 1);
    xs.push([e0, 0.0, 0.0]);

    let rhs = |t: f64, x: &[f64; 3], xd: &[f64; 3]| -> [f64; 3] {
        let now = profile.eval(t);
        let delayed_a = if t - phi < 0.0 {
            0.0
        } else {
            profile.eval(t - phi)
        };
        let y0 = a0m.matvec(&x[..]);
        let y1 = a1m.matvec(&xd[..]);
        [
            y0[0] + y1[0],
            y0[1] + y1[1] + (now - delayed_a),
            y0[2] + y1[2] + now,
        ]
    };

    // delayed state at a grid point (zero before activation)
    let grid = |xs: &Vec<[f64; 3]>, j: isize| -> [f64; 3] {
        if j < 0 {
            [0.0; 3]
        } else {
            xs[j as usize]
        }
    };
    // delayed state halfway between grid points j and j+1 (cubic Hermite)
    let mid = |xs: &Vec<[f64; 3]>, fs: &Vec<[f64; 3]>, j: isize| -> [f64; 3] {
        if j < 0 {
            return [0.0; 3];
        }
        let j = j as usize;
        let (xa, xb) = (xs[j], xs[j + 1]);
        let (fa, fb) = (fs[j], fs[j + 1]);
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = 0.5 * (xa[i] + xb[i]) + h / 8.0 * (fa[i] - fb[i]);
        }
        out
    };

    for n in 0..steps {
        let t = n as f64 * h;
        let j = n as isize - m_delay as isize;
        let x = xs[n];
        let f_here = rhs(t, &x, &grid(&xs, j));
        fs.push(f_here);

        let k1 = f_here;
        let xd_mid = mid(&xs, &fs, j);
        let k2 = rhs(t + h / 2.0, &add_scaled(&x, &k1, h / 2.0), &xd_mid);
        let k3 = rhs(t + h / 2.0, &add_scaled(&x, &k2, h / 2.0), &xd_mid);
        let k4 = rhs(t + h, &add_scaled(&x, &k3, h), &grid(&xs, j + 1));
        let mut next = x;
        for i in 0..3 {
            next[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        xs.push(next);
    }

    let mut log = ReferenceLog {
        ts: h,
        time: Vec::with_capacity(steps + 1),
        x1: Vec::with_capacity(steps + 1),
        x2: Vec::with_capacity(steps + 1),
        x3: Vec::with_capacity(steps + 1),
    };
    for (n, x) in xs.iter().enumerate() {
        log.time.push(n as f64 * h);
        log.x1.push(x[0]);
        log.x2.push(x[1]);
        log.x3.push(x[2]);
    }
    log
}

fn add_scaled(x: &[f64; 3], k: &[f64; 3], s: f64) -> [f64; 3] {
    [x[0] + s * k[0], x[1] + s * k[1], x[2] + s * k[2]]
}

/// Response metrics of one follower over a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FollowerMetrics {
    pub vehicle: usize,
    pub peak_abs_x1: f64,
    pub peak_abs_x3: f64,
    pub time_of_peak_abs_x3: f64,
    /// Earliest time after which |x1| stays within 2 % of its peak;
    /// `None` when the log ends before the signal settles.
    pub settling_time_x1: Option<f64>,
    pub max_abs_u: f64,
}

/// Peak, peak-time and settling metrics per follower.
pub fn response_metrics(log: &TimeSeriesLog) -> Vec<FollowerMetrics> {
    let mut out = Vec::new();
    for (i, veh) in log.vehicles.iter().enumerate() {
        let Some(err) = &veh.errors else { continue };
        let p1 = peak_abs(&log.time, &err.x1);
        let p3 = peak_abs(&log.time, &err.x3);
        let pu = peak_abs(&log.time, &veh.u_cmd);
        out.push(FollowerMetrics {
            vehicle: i,
            peak_abs_x1: p1.value,
            peak_abs_x3: p3.value,
            time_of_peak_abs_x3: p3.time,
            settling_time_x1: settling_time(&log.time, &err.x1, 0.02 * p1.value),
            max_abs_u: pu.value,
        });
    }
    out
}

fn settling_time(time: &[f64], series: &[f64], band: f64) -> Option<f64> {
    let mut last_violation: Option<usize> = None;
    for (k, x) in series.iter().enumerate() {
        if x.abs() > band {
            last_violation = Some(k);
        }
    }
    match last_violation {
        None => Some(0.0),
        Some(k) if k + 1 < time.len() => Some(time[k + 1]),
        Some(_) => None,
    }
}

/// One follower of a heterogeneous demonstration string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeterogeneousFollower {
    pub tau: f64,
    pub phi: f64,
    pub kp: f64,
    pub kd: f64,
}

/// Builds and runs a platoon whose followers have distinct drivelines
/// under a trapezoidal leader maneuver; returns the scenario alongside the
/// log and per-follower metrics so callers can reuse the exact setup.
pub fn heterogeneous_string_demo(
    followers: &[HeterogeneousFollower],
    headway: f64,
    ts: f64,
) -> Result<(ScenarioConfig, TimeSeriesLog, Vec<FollowerMetrics>), SimError> {
    if followers.len() < 2 {
        return Err(SimError::InvalidConfig(vec![Violation::new(
            "heterogeneous demo",
            "need at least 2 followers (3 vehicles)",
        )]));
    }
    let profile = LeaderProfile::trapezoid(1.0, 1.0, 2.0, 4.0);
    let maneuver_end = profile.end_time().expect("trapezoid ends");
    let duration = maneuver_end + 25.0;
    let mut vehicles = vec![crate::config::VehicleEntry {
        tau: followers[0].tau,
        phi: 0.0,
        length: 4.0,
        headway,
        standstill_gap: 2.0,
        kp: 0.0,
        kd: 0.0,
        controller: ControllerKind::Predictor,
        initial_error: 0.0,
        initial_input: 0.0,
    }];
    for f in followers {
        vehicles.push(crate::config::VehicleEntry {
            tau: f.tau,
            phi: f.phi,
            length: 4.0,
            headway,
            standstill_gap: 2.0,
            kp: f.kp,
            kd: f.kd,
            controller: ControllerKind::Predictor,
            initial_error: 0.0,
            initial_input: 0.0,
        });
    }
    let cfg = ScenarioConfig {
        version: crate::config::SCHEMA_VERSION,
        ts,
        duration,
        leader_profile: profile,
        vehicles,
        events: Vec::new(),
        output: Default::default(),
    };
    let log = run_platoon_sim(&cfg)?;
    let metrics = response_metrics(&log);
    Ok((cfg, log, metrics))
}
