//! Simulation and discrete-time stability analysis for heterogeneous
//! vehicle platoons whose members have a first-order driveline lag and a
//! pure actuation delay.
//!
//! The crate is organized around the pipeline a platooning study follows:
//!
//! * [`config`] — vehicle/controller parameters, scenario documents and
//!   their validation.
//! * [`numerics`] — dense matrix exponential, exact ZOH discretization,
//!   eigenvalues, spectral radius.
//! * [`plant`] — exact sampled propagation of the delayed longitudinal
//!   vehicle model, including the dead-time buffer.
//! * [`controller`] — the discrete predictor-feedback CACC law and the
//!   conventional delay-free law, with all controller memory explicit.
//! * [`stability`] — the lifted closed-loop matrix of the sampled system
//!   and its unit-disk spectral test, plus gain/parameter scans.
//! * [`sim`] — multi-vehicle platoon simulation, continuous reference
//!   simulations, leader profiles, response metrics and CSV logging.

// parameter guards use `!(x > 0.0)` so NaN fails validation like any
// other out-of-domain value
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod numerics;
pub mod plant;
pub mod sim;
pub mod stability;
