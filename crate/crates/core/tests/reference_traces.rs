//! Pointwise regression against the published x3 traces of the two
//! reference closed loops (initial-condition response, leader at
//! standstill, tau 0.067 s / phi 0.15 s / headway 0.5 s / kp 0.2 /
//! kd 0.6866).
//!
//! The published figure never states e0, so one scale factor is fixed
//! from the compensated trace's extremum; every other sample of both
//! curves must then match with no remaining freedom. The published
//! polyline is plot-compressed (about 0.2 % amplitude jitter, and time
//! jitter near steep zero crossings), which sets the tolerance.

use platoon::config::{GainSet, VehicleParams};
use platoon::sim::{run_reference_sim, LeaderProfile, ReferenceModel};

/// (time, x3) samples of the published compensated-loop trace.
const COMPENSATED_TRACE: [(f64, f64); 9] = [
    (1.14613182029, -1.29610164523542),
    (1.94613182029, -2.07548647576215),
    (3.14613182029, -2.39355622062818),
    (4.34613182029, -2.08677638790439),
    (6.34613182029, -1.19075567778733),
    (9.14613182029, -0.291250302209125),
    (11.54613182029, -0.000734119975227543),
    (13.94613182029, 0.0555578795541329),
    (17.94613182029, 0.0215174010749202),
];

/// (time, x3) samples of the published delayed-loop trace.
const DELAYED_TRACE: [(f64, f64); 10] = [
    (0.701332901326335, -0.255537951767149),
    (1.36048620157035, -0.910344435781433),
    (2.15081617963214, -1.80771597723639),
    (3.04517148414566, -2.57851887510835),
    (4.06129200508455, -2.87692912803678),
    (5.11545020089916, -2.55233039443861),
    (7.09010386970164, -1.06764272460736),
    (8.69470831094451, -0.0222658684792805),
    (10.6238747787339, 0.4241271631426),
    (16.3636545941833, -0.141013491858903),
];

#[test]
fn reference_simulations_reproduce_published_traces() {
    let params = VehicleParams {
        tau: 0.067,
        phi: 0.15,
        length: 4.0,
        headway: 0.5,
        standstill_gap: 2.0,
    };
    let gains = GainSet {
        kp: 0.2,
        kd: 0.7 - 0.2 * 0.067,
    };
    let ts_fine = 1e-3;
    let compensated = run_reference_sim(
        ReferenceModel::Predictor,
        &params,
        gains,
        1.0,
        &LeaderProfile::standstill(),
        20.0,
        ts_fine,
    )
    .unwrap();
    let delayed = run_reference_sim(
        ReferenceModel::Conventional,
        &params,
        gains,
        1.0,
        &LeaderProfile::standstill(),
        20.0,
        ts_fine,
    )
    .unwrap();

    // the published run's e0, recovered from the compensated extremum
    let scale = 2.39355622062818 / compensated.peak_abs_x3().value;
    let peak = 2.39355622062818;

    let check = |name: &str, log: &platoon::sim::ReferenceLog, trace: &[(f64, f64)], tol: f64| {
        for &(t, published) in trace {
            let k = (t / ts_fine).round() as usize;
            let mine = log.x3[k] * scale;
            assert!(
                (mine - published).abs() <= tol * peak,
                "{name} trace at t = {t:.3}: simulated {mine:.6} vs published {published:.6}"
            );
        }
    };
    // compensated curve: pure LTI, matches to plot-compression noise
    check("compensated", &compensated, &COMPENSATED_TRACE, 0.005);
    // delayed curve: DDE integration, slightly looser near zero crossings
    check("delayed", &delayed, &DELAYED_TRACE, 0.01);
}
