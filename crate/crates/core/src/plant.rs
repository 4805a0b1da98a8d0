//! Exact sampled propagation of the delayed longitudinal vehicle model.
//!
//! The model is linear (position/velocity/first-order acceleration lag
//! driven by a dead-time input), so with the input held constant over each
//! sample the one-step transition has a closed form; no integration error
//! is introduced beyond floating point. The dead time is realized at
//! sample granularity by a FIFO buffer of the last `d` inputs.

use crate::config::VehicleState;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum PlantError {
    NonPositiveTau(f64),
    NonPositiveTs(f64),
}

impl fmt::Display for PlantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlantError::NonPositiveTau(v) => write!(f, "tau must be positive, got {}", v),
            PlantError::NonPositiveTs(v) => write!(f, "ts must be positive, got {}", v),
        }
    }
}

impl std::error::Error for PlantError {}

/// FIFO buffer realizing a pure dead time of `depth` samples.
///
/// Pushing the current input returns the input applied `depth` samples
/// earlier; depth 0 is a passthrough.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBuffer {
    slots: Vec<f64>,
    head: usize,
}

impl DelayBuffer {
    /// Quiescent history: all in-flight inputs are zero.
    pub fn new(depth: usize) -> Self {
        Self::filled(depth, 0.0)
    }

    /// Constant pre-history, for runs that start with an input in flight.
    pub fn filled(depth: usize, value: f64) -> Self {
        DelayBuffer {
            slots: vec![value; depth],
            head: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.slots.len()
    }

    /// Enqueues `u_now` and returns the value enqueued `depth` samples ago.
    pub fn push(&mut self, u_now: f64) -> f64 {
        if self.slots.is_empty() {
            return u_now;
        }
        let delayed = self.slots[self.head];
        self.slots[self.head] = u_now;
        self.head = (self.head + 1) % self.slots.len();
        delayed
    }
}

/// Exact one-sample transition of (q, v, a) under a zero-order-held input.
///
/// With `E = e^(-ts/tau)` the update is
///
/// ```text
/// a+ = E a + (1-E) u
/// v+ = v + tau (1-E) a + (ts - tau (1-E)) u
/// q+ = q + ts v + tau (ts - tau (1-E)) a + (ts²/2 - tau ts + tau² (1-E)) u
/// ```
///
/// which equals the corresponding blocks of the exponential of the
/// augmented (q, v, a, u) system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantPropagator {
    tau: f64,
    ts: f64,
    e: f64,
    c_va: f64,
    c_vu: f64,
    c_qa: f64,
    c_qu: f64,
}

impl PlantPropagator {
    pub fn new(tau: f64, ts: f64) -> Result<Self, PlantError> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(PlantError::NonPositiveTau(tau));
        }
        if !(ts > 0.0) || !ts.is_finite() {
            return Err(PlantError::NonPositiveTs(ts));
        }
        let e = (-ts / tau).exp();
        let om = 1.0 - e;
        Ok(PlantPropagator {
            tau,
            ts,
            e,
            c_va: tau * om,
            c_vu: ts - tau * om,
            c_qa: tau * (ts - tau * om),
            c_qu: ts * ts / 2.0 - tau * ts + tau * tau * om,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// `e^(-ts/tau)`, the lag decay over one sample.
    pub fn decay(&self) -> f64 {
        self.e
    }

    /// Transition coefficients as (E, c_va, c_vu, c_qa, c_qu).
    pub fn coefficients(&self) -> (f64, f64, f64, f64, f64) {
        (self.e, self.c_va, self.c_vu, self.c_qa, self.c_qu)
    }

    /// Propagates one sample with `u` the (already delayed) applied input.
    pub fn step(&self, s: VehicleState, u: f64) -> VehicleState {
        VehicleState {
            q: s.q + self.ts * s.v + self.c_qa * s.a + self.c_qu * u,
            v: s.v + self.c_va * s.a + self.c_vu * u,
            a: self.e * s.a + (1.0 - self.e) * u,
        }
    }
}
