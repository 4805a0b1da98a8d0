//! The discrete-time predictor-feedback CACC law and the conventional
//! delay-free law, with all controller memory explicit.
//!
//! The predictor applies the delay-free design to a forward prediction of
//! the plant over the dead time. Two predictions are maintained:
//!
//! * the ego acceleration `d` samples ahead, which for the exact
//!   first-order lag under held inputs is a weighted sum of the current
//!   acceleration and the last `d` applied inputs, and
//! * the (x1, x2) error pair `d` samples ahead, which is the exact held-
//!   input evolution of the double integrator driven by the stored
//!   virtual-input history.
//!
//! All weights depend only on (τ, ts, d) and are computed once at
//! construction; recomputing them per step risks inconsistent rounding
//! across modules.

use crate::config::{GainSet, Timing};
use std::collections::VecDeque;

/// What a follower's controller reads at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    /// Spacing error, m.
    pub x1: f64,
    /// Spacing-error rate, m/s.
    pub x2: f64,
    /// Ego acceleration, m/s².
    pub a_self: f64,
    /// Predecessor acceleration, m/s².
    pub a_lead: f64,
}

/// One controller invocation's results, kept for logging and analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Commanded acceleration setpoint u, m/s².
    pub u: f64,
    /// Virtual input ū of the inner delay-free loop, m/s².
    pub u_bar: f64,
    /// Predicted ego acceleration at the end of the dead time, m/s².
    pub a_hat: f64,
    /// Predicted (x1, x2) at the end of the dead time.
    pub x_hat: (f64, f64),
}

/// Memory and precomputed weights of one follower's predictor controller.
///
/// History convention, fixed project-wide: index j = 1 is the most recent
/// past value (one sample old), j = d the oldest. `hist[j-1]` stores the
/// value from sample k - j.
#[derive(Debug, Clone)]
pub struct PredictorState {
    gains: GainSet,
    timing: Timing,
    tau: f64,
    headway: f64,
    /// e^(-d ts / τ): remaining lag decay over the whole dead time.
    alpha: f64,
    /// beta[j-1] = e^(-(j-1) ts/τ) - e^(-j ts/τ), the weight of u(k-j).
    beta: Vec<f64>,
    /// g[j-1] = [ts²/2 + (j-1) ts², ts], the double-integrator weight of ū(k-j).
    g: Vec<[f64; 2]>,
    u_hist: VecDeque<f64>,
    ubar_hist: VecDeque<f64>,
}

impl PredictorState {
    pub fn new(gains: GainSet, timing: Timing, tau: f64, headway: f64) -> Self {
        assert!(
            tau > 0.0 && headway > 0.0,
            "tau and headway must be positive"
        );
        let d = timing.d;
        let ts = timing.ts;
        let alpha = (-(d as f64) * ts / tau).exp();
        let beta: Vec<f64> = (1..=d)
            .map(|j| (-((j - 1) as f64) * ts / tau).exp() - (-(j as f64) * ts / tau).exp())
            .collect();
        let g: Vec<[f64; 2]> = (1..=d)
            .map(|j| [(0.5 + (j - 1) as f64) * ts * ts, ts])
            .collect();
        PredictorState {
            gains,
            timing,
            tau,
            headway,
            alpha,
            beta,
            g,
            u_hist: VecDeque::from(vec![0.0; d]),
            ubar_hist: VecDeque::from(vec![0.0; d]),
        }
    }

    /// Replaces the quiescent input history with a constant in-flight input.
    pub fn with_initial_input(mut self, u0: f64) -> Self {
        for slot in self.u_hist.iter_mut() {
            *slot = u0;
        }
        self
    }

    pub fn timing(&self) -> Timing {
        self.timing
    }

    pub fn gains(&self) -> GainSet {
        self.gains
    }

    /// e^(-d ts / τ).
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn g_weights(&self) -> &[[f64; 2]] {
        &self.g
    }

    /// Predicted ego acceleration `d` samples ahead. Exact for the
    /// first-order driveline under held inputs.
    pub fn predict_acceleration(&self, a_self: f64) -> f64 {
        let fed: f64 = self.beta.iter().zip(&self.u_hist).map(|(b, u)| b * u).sum();
        self.alpha * a_self + fed
    }

    /// Predicted (x1, x2) `d` samples ahead: the free double-integrator
    /// drift plus the contribution of the stored virtual inputs.
    pub fn predict_error_state(&self, x1: f64, x2: f64) -> (f64, f64) {
        let horizon = self.timing.d as f64 * self.timing.ts;
        let mut x1_hat = x1 + horizon * x2;
        let mut x2_hat = x2;
        for (gj, ubar) in self.g.iter().zip(&self.ubar_hist) {
            x1_hat += gj[0] * ubar;
            x2_hat += gj[1] * ubar;
        }
        (x1_hat, x2_hat)
    }

    /// Runs one sample of the predictor law and advances the histories.
    ///
    /// Order is normative: the virtual input is computed from the history
    /// *before* it is pushed — ū(k) enters its own history only from the
    /// next sample onward.
    pub fn step(&mut self, m: &Measurement) -> ControlOutput {
        let (x1_hat, x2_hat) = self.predict_error_state(m.x1, m.x2);
        let u_bar = -(self.gains.kp * x1_hat + self.gains.kd * x2_hat);
        let a_hat = self.predict_acceleration(m.a_self);
        let ratio = self.tau / self.headway;
        let u = (1.0 - ratio) * a_hat + ratio * m.a_lead - ratio * u_bar;
        if self.timing.d > 0 {
            self.u_hist.push_front(u);
            self.u_hist.pop_back();
            self.ubar_hist.push_front(u_bar);
            self.ubar_hist.pop_back();
        }
        ControlOutput {
            u,
            u_bar,
            a_hat,
            x_hat: (x1_hat, x2_hat),
        }
    }
}

/// The delay-free law evaluated at the sample: feedforward of the
/// predecessor's acceleration, cancellation of the ego lag, and PD action
/// on the spacing error.
pub fn conventional_control(gains: GainSet, tau: f64, headway: f64, m: &Measurement) -> f64 {
    let ratio = tau / headway;
    ratio * m.a_lead + (1.0 - ratio) * m.a_self + ratio * (gains.kp * m.x1 + gains.kd * m.x2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::VehicleState;
    use crate::plant::PlantPropagator;

    const TAU: f64 = 0.067;
    const TS: f64 = 0.01;
    const HEADWAY: f64 = 0.5;

    fn gains() -> GainSet {
        GainSet {
            kp: 0.2,
            kd: 0.7 - 0.2 * TAU,
        }
    }

    fn predictor(d: usize) -> PredictorState {
        PredictorState::new(gains(), Timing { ts: TS, d }, TAU, HEADWAY)
    }

    #[test]
    fn weights_satisfy_telescoping_identities() {
        let ps = predictor(15);
        let beta_sum: f64 = ps.beta().iter().sum();
        assert!((beta_sum - (1.0 - ps.alpha())).abs() < 1e-12);
        let g_sum = ps
            .g_weights()
            .iter()
            .fold([0.0, 0.0], |acc, g| [acc[0] + g[0], acc[1] + g[1]]);
        let horizon = 15.0 * TS;
        assert!((g_sum[0] - horizon * horizon / 2.0).abs() < 1e-12);
        assert!((g_sum[1] - horizon).abs() < 1e-12);
        assert_eq!(ps.beta().len(), 15);
        assert_eq!(ps.g_weights().len(), 15);
    }

    #[test]
    fn zero_delay_prediction_is_identity() {
        let ps = predictor(0);
        assert_eq!(ps.predict_acceleration(0.37), 0.37);
        assert_eq!(ps.predict_error_state(1.5, -0.2), (1.5, -0.2));
    }

    #[test]
    fn constant_history_prediction_telescopes() {
        let c = 0.83;
        let ps = predictor(15).with_initial_input(c);
        assert!((ps.predict_acceleration(c) - c).abs() < 1e-14);
    }

    #[test]
    fn acceleration_prediction_from_zero_with_unit_history() {
        // a = 0, all in-flight inputs 1: prediction is 1 - e^{-d ts/τ}
        let ps = predictor(15).with_initial_input(1.0);
        let expected = 1.0 - (-(15.0 * TS) / TAU).exp();
        assert!((ps.predict_acceleration(0.0) - expected).abs() < 1e-14);
        assert!((ps.predict_acceleration(0.0) - 0.8934).abs() < 1e-4);
    }

    #[test]
    fn error_state_prediction_free_drift() {
        let ps = predictor(15);
        let (x1h, x2h) = ps.predict_error_state(2.0, 0.5);
        assert!((x1h - (2.0 + 15.0 * TS * 0.5)).abs() < 1e-14);
        assert_eq!(x2h, 0.5);
    }

    #[test]
    fn error_state_prediction_constant_virtual_input() {
        let d = 12;
        let c = -0.4;
        let mut ps = predictor(d);
        for slot in ps.ubar_hist.iter_mut() {
            *slot = c;
        }
        let (x1h, x2h) = ps.predict_error_state(0.0, 0.0);
        let horizon = d as f64 * TS;
        assert!((x1h - c * horizon * horizon / 2.0).abs() < 1e-14);
        assert!((x2h - c * horizon).abs() < 1e-14);
    }

    #[test]
    fn all_zero_produces_zero_command() {
        let mut ps = predictor(15);
        let out = ps.step(&Measurement {
            x1: 0.0,
            x2: 0.0,
            a_self: 0.0,
            a_lead: 0.0,
        });
        assert_eq!(out.u, 0.0);
        assert_eq!(out.u_bar, 0.0);
    }

    #[test]
    fn tau_equal_headway_cancels_prediction_term() {
        let timing = Timing { ts: TS, d: 0 };
        let mut ps = PredictorState::new(gains(), timing, 0.5, 0.5);
        let m = Measurement {
            x1: 1.0,
            x2: 0.0,
            a_self: 0.7,
            a_lead: 0.25,
        };
        let out = ps.step(&m);
        assert!((out.u - (m.a_lead - out.u_bar)).abs() < 1e-15);
    }

    #[test]
    fn command_composition_arithmetic() {
        // τ/h = 0.134, â = a_self = 1, ū = -(kp·1) = -0.2, a_lead = 0.5
        let mut ps = predictor(0);
        let m = Measurement {
            x1: 1.0,
            x2: 0.0,
            a_self: 1.0,
            a_lead: 0.5,
        };
        let out = ps.step(&m);
        assert!((out.u_bar + 0.2).abs() < 1e-15);
        assert!((out.u - 0.9598).abs() < 1e-15);
    }

    #[test]
    fn conventional_feedforward_only() {
        let m = Measurement {
            x1: 0.0,
            x2: 0.0,
            a_self: 0.4,
            a_lead: 0.9,
        };
        let u = conventional_control(gains(), TAU, HEADWAY, &m);
        let ratio = TAU / HEADWAY;
        assert!((u - (ratio * 0.9 + (1.0 - ratio) * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn conventional_pd_on_spacing_error() {
        let m = Measurement {
            x1: 1.0,
            x2: 0.0,
            a_self: 0.0,
            a_lead: 0.0,
        };
        let u = conventional_control(gains(), TAU, HEADWAY, &m);
        assert!((u - 0.134 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_delay_predictor_equals_conventional() {
        let mut ps = predictor(0);
        let cases = [
            Measurement {
                x1: 1.0,
                x2: -0.3,
                a_self: 0.2,
                a_lead: 0.5,
            },
            Measurement {
                x1: -2.5,
                x2: 1.1,
                a_self: -0.7,
                a_lead: 0.0,
            },
            Measurement {
                x1: 0.01,
                x2: 0.02,
                a_self: 0.03,
                a_lead: 0.04,
            },
        ];
        for m in cases {
            let u_pred = ps.step(&m).u;
            let u_conv = conventional_control(gains(), TAU, HEADWAY, &m);
            assert!((u_pred - u_conv).abs() <= 1e-14, "{} vs {}", u_pred, u_conv);
        }
    }

    #[test]
    fn controller_is_linear_in_inputs() {
        // superposition over measurements and histories
        let drive = |scale: f64| -> Vec<f64> {
            let mut ps = predictor(8);
            let mut out = Vec::new();
            for k in 0..40 {
                let m = Measurement {
                    x1: scale * (0.1 * k as f64).sin(),
                    x2: scale * (0.07 * k as f64).cos(),
                    a_self: scale * 0.01 * k as f64,
                    a_lead: scale * (0.05 * k as f64).sin(),
                };
                out.push(ps.step(&m).u);
            }
            out
        };
        let base = drive(1.0);
        let scaled = drive(2.5);
        for (u1, u2) in base.iter().zip(&scaled) {
            assert!((2.5 * u1 - u2).abs() < 1e-12);
        }
    }

    #[test]
    fn open_loop_acceleration_prediction_is_exact() {
        // drive the exact plant with an arbitrary input sequence and check
        // â(k) = a(k+d) sample for sample
        let d = 15;
        let plant = PlantPropagator::new(TAU, TS).unwrap();
        let mut delay = crate::plant::DelayBuffer::new(d);
        let mut ps = predictor(d);
        let mut state = VehicleState::default();
        let mut a_series = Vec::new();
        let mut a_hat_series = Vec::new();
        let steps = 400;
        for k in 0..steps {
            let u = (0.13 * k as f64).sin() + 0.2;
            a_series.push(state.a);
            a_hat_series.push(ps.predict_acceleration(state.a));
            // mirror the applied input into the controller history
            if d > 0 {
                ps.u_hist.push_front(u);
                ps.u_hist.pop_back();
            }
            let u_applied = delay.push(u);
            state = plant.step(state, u_applied);
        }
        let max_a = a_series.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        for k in 0..(steps - d) {
            assert!((a_hat_series[k] - a_series[k + d]).abs() <= 1e-9 * max_a);
        }
    }

    #[test]
    fn error_state_prediction_matches_double_integrator() {
        // algebraic identity: x̂(k) equals iterating the held-input double
        // integrator d steps over the stored virtual inputs
        let d = 10;
        let mut ps = predictor(d);
        // fill the history with an arbitrary sequence (j=1 most recent)
        let hist: Vec<f64> = (1..=d).map(|j| (j as f64 * 0.37).sin()).collect();
        for (slot, v) in ps.ubar_hist.iter_mut().zip(&hist) {
            *slot = *v;
        }
        let (x1, x2) = (0.8, -0.15);
        let (x1_hat, x2_hat) = ps.predict_error_state(x1, x2);

        // oracle: step ẋ1 = x2, ẋ2 = ū forward d samples; the input on
        // step m (0-based, from sample k) is ū(k - d + m) = hist[d-1-m]
        let (mut z1, mut z2) = (x1, x2);
        for m in 0..d {
            let ub = hist[d - 1 - m];
            z1 += TS * z2 + TS * TS / 2.0 * ub;
            z2 += TS * ub;
        }
        assert!((x1_hat - z1).abs() < 1e-12);
        assert!((x2_hat - z2).abs() < 1e-12);
    }
}
