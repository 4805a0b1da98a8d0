//! Lifted discrete-time closed loop of one follower and its unit-disk
//! stability test.
//!
//! The sampled error dynamics (exact ZOH discretization Φ, Γ, Γ_w), the
//! chain of `d` in-flight inputs and the chain of `d` past virtual inputs
//! are stacked into one delay-free linear recursion
//!
//! ```text
//! x_cl(k+1) = A_cl x_cl(k) + B_cl [w(k); a_lead(k)]
//! ```
//!
//! with `x_cl = [x1 x2 x3, u(k-d)…u(k-1), ū(k-d)…ū(k-1)]` of dimension
//! 3 + 2d. The follower is input-to-state stable iff every eigenvalue of
//! `A_cl` lies strictly inside the unit disk. The controller's linear form
//! (C_x, C_z, C_a, A_x, A_z, B_a) is assembled here and cross-validated in
//! tests against the step-by-step controller — the strongest guard against
//! algebra mistakes in the lifting.

use crate::config::{ControllerKind, GainSet, Timing, Violation};
use crate::numerics::{eigenvalues, zoh_pair, Matrix, NumericsError};
use num_complex::Complex64;
use serde::Serialize;
use std::fmt;

/// A spectral radius within this distance of 1 is reported "marginal",
/// never "stable"; the guard band reflects eigensolver tolerance.
pub const STABILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum StabilityError {
    InvalidParams(Violation),
    Numerics(NumericsError),
}

impl fmt::Display for StabilityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StabilityError::InvalidParams(v) => write!(f, "invalid parameters: {}", v),
            StabilityError::Numerics(e) => write!(f, "numerical failure: {}", e),
        }
    }
}

impl std::error::Error for StabilityError {}

impl From<NumericsError> for StabilityError {
    fn from(e: NumericsError) -> Self {
        StabilityError::Numerics(e)
    }
}

/// Continuous error dynamics of one follower, ẋ = A0 x + A1 x(t-φ)
/// + B1 u(t-φ) + B2 a_lead, in the transformed coordinates.
#[derive(Debug, Clone)]
pub struct ErrorSystem {
    pub a0: Matrix,
    pub a1: Matrix,
    pub b1: Matrix,
    pub b2: Matrix,
    pub tau: f64,
    pub headway: f64,
    pub gains: GainSet,
}

/// Entries of A0, A1, B1, B2 for the given parameters.
pub fn build_error_system(
    tau: f64,
    headway: f64,
    gains: GainSet,
) -> Result<ErrorSystem, StabilityError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(StabilityError::InvalidParams(Violation::new(
            "params",
            "tau must be positive",
        )));
    }
    if !(headway > 0.0) || !headway.is_finite() {
        return Err(StabilityError::InvalidParams(Violation::new(
            "params",
            "headway must be positive",
        )));
    }
    if !gains.kp.is_finite() || !gains.kd.is_finite() {
        return Err(StabilityError::InvalidParams(Violation::new(
            "params",
            "gains must be finite",
        )));
    }
    let (h, t) = (headway, tau);
    let c = (t - h) / (t * h);
    let a0 = Matrix::from_rows(&[&[0.0, 1.0, 0.0], &[0.0, c, -c], &[0.0, 1.0 / h, -1.0 / h]]);
    let a1 = Matrix::from_rows(&[
        &[0.0, 0.0, 0.0],
        &[-gains.kp, -c - gains.kd, c],
        &[0.0, 0.0, 0.0],
    ]);
    let b1 = Matrix::col_vec(&[0.0, -h / t, 0.0]);
    let b2 = Matrix::col_vec(&[0.0, 1.0, 1.0]);
    Ok(ErrorSystem {
        a0,
        a1,
        b1,
        b2,
        tau,
        headway,
        gains,
    })
}

/// Exact one-sample discretization of the error dynamics.
#[derive(Debug, Clone)]
pub struct Discretized {
    /// Φ = e^(A0 ts).
    pub phi: Matrix,
    /// Γ: ZOH gain of the held control channel (through B1).
    pub gamma: Matrix,
    /// Γ_w: ZOH gain of a per-sample-constant predecessor acceleration
    /// (through B2); this is the disturbance quadrature used by the lifted
    /// simulation oracle.
    pub gamma_w: Matrix,
}

pub fn discretize(es: &ErrorSystem, ts: f64) -> Result<Discretized, StabilityError> {
    let (phi, gamma) = zoh_pair(&es.a0, &es.b1, ts)?;
    let (_, gamma_w) = zoh_pair(&es.a0, &es.b2, ts)?;
    Ok(Discretized {
        phi,
        gamma,
        gamma_w,
    })
}

/// The controller written as a linear map of the lifted state:
/// u(k) = C_x x̄(k) + C_z z(k) + C_a a_lead(k) and
/// z(k+1) = A_x x̄(k) + A_z z(k) + B_a a_lead(k).
#[derive(Debug, Clone)]
pub struct ControllerMatrices {
    pub cx: Matrix,
    pub cz: Matrix,
    pub ca: f64,
    pub ax: Matrix,
    pub az: Matrix,
    pub ba: Matrix,
}

/// Slot convention: x̄ = [x1 x2 x3, u(k-d), …, u(k-1)] and
/// z = [ū(k-d), …, ū(k-1)], so history index j (1 = most recent) lives at
/// chain slot d - j.
///
/// The ego acceleration is eliminated via a = (x3 - x2) / h so the lifted
/// state needs no extra channel; the simulation feeds the measured value,
/// and both views agree because the coordinate transform is enforced.
pub fn assemble_controller_matrices(
    tau: f64,
    headway: f64,
    gains: GainSet,
    timing: Timing,
) -> ControllerMatrices {
    let d = timing.d;
    let ts = timing.ts;
    let nx = 3 + d;
    let r = tau / headway;
    let h = headway;
    let horizon = d as f64 * ts;
    let alpha = (-horizon / tau).exp();
    // K M with M the free drift [[1, d ts], [0, 1]]
    let km = [gains.kp, gains.kp * horizon + gains.kd];

    let mut cx = Matrix::zeros(1, nx);
    cx[(0, 0)] = r * km[0];
    cx[(0, 1)] = (1.0 - r) * alpha * (-1.0 / h) + r * km[1];
    cx[(0, 2)] = (1.0 - r) * alpha * (1.0 / h);
    let mut cz = Matrix::zeros(1, d);
    let mut ax = Matrix::zeros(d, nx);
    let mut az = Matrix::zeros(d, d);
    let ba = Matrix::zeros(d, 1);

    for j in 1..=d {
        let beta_j = (-((j - 1) as f64) * ts / tau).exp() - (-(j as f64) * ts / tau).exp();
        let g_j = [(0.5 + (j - 1) as f64) * ts * ts, ts];
        let kg = gains.kp * g_j[0] + gains.kd * g_j[1];
        cx[(0, 3 + (d - j))] = (1.0 - r) * beta_j;
        cz[(0, d - j)] = r * kg;
        az[(d - 1, d - j)] = -kg;
    }
    if d > 0 {
        for i in 0..(d - 1) {
            az[(i, i + 1)] = 1.0;
        }
        ax[(d - 1, 0)] = -km[0];
        ax[(d - 1, 1)] = -km[1];
    }

    ControllerMatrices {
        cx,
        cz,
        ca: r,
        ax,
        az,
        ba,
    }
}

/// Row of the delay-free law on [x1 x2 x3] with the ego acceleration
/// eliminated: u = (τ/h) a_lead + C·x.
fn direct_law_row(tau: f64, headway: f64, gains: GainSet) -> [f64; 3] {
    let r = tau / headway;
    let h = headway;
    [r * gains.kp, -(1.0 - r) / h + r * gains.kd, (1.0 - r) / h]
}

/// Plant-side lifted pieces: x̄(k+1) = Ā x̄(k) + B̄1 u(k) + B̄2 w(k).
fn plant_lift(disc: &Discretized, d: usize) -> (Matrix, Matrix, Matrix) {
    let nx = 3 + d;
    let mut abar = Matrix::zeros(nx, nx);
    abar.set_block(0, 0, &disc.phi);
    let mut bbar1 = Matrix::zeros(nx, 1);
    if d == 0 {
        bbar1.set_block(0, 0, &disc.gamma);
    } else {
        for row in 0..3 {
            abar[(row, 3)] = disc.gamma[(row, 0)];
        }
        for i in 0..(d - 1) {
            abar[(3 + i, 3 + i + 1)] = 1.0;
        }
        bbar1[(nx - 1, 0)] = 1.0;
    }
    let mut bbar2 = Matrix::zeros(nx, 3);
    bbar2.set_block(0, 0, &Matrix::identity(3));
    (abar, bbar1, bbar2)
}

/// Combines plant lift and controller into the closed loop:
/// A_cl = [[Ā + B̄1 C_x, B̄1 C_z], [A_x, A_z]] and
/// B_cl = [[B̄2, B̄1 C_a], [0, B_a]] acting on [w; a_lead].
pub fn closed_loop_matrix(
    disc: &Discretized,
    cm: &ControllerMatrices,
    timing: Timing,
) -> Result<(Matrix, Matrix), StabilityError> {
    let d = timing.d;
    let nx = 3 + d;
    if cm.cx.cols() != nx || cm.cz.cols() != d || cm.ax.rows() != d || cm.az.rows() != d {
        return Err(StabilityError::Numerics(NumericsError::DimensionMismatch {
            expected: (nx, d),
            got: (cm.cx.cols(), cm.cz.cols()),
        }));
    }
    let (abar, bbar1, bbar2) = plant_lift(disc, d);
    let dim = nx + d;
    let mut acl = Matrix::zeros(dim, dim);
    acl.set_block(0, 0, &abar.add(&bbar1.matmul(&cm.cx)));
    if d > 0 {
        acl.set_block(0, nx, &bbar1.matmul(&cm.cz));
        acl.set_block(nx, 0, &cm.ax);
        acl.set_block(nx, nx, &cm.az);
    }
    let mut bcl = Matrix::zeros(dim, 4);
    bcl.set_block(0, 0, &bbar2);
    bcl.set_block(0, 3, &bbar1.scale(cm.ca));
    if d > 0 {
        bcl.set_block(nx, 3, &cm.ba);
    }
    Ok((acl, bcl))
}

/// Everything the lifted analysis produces for one follower.
#[derive(Debug, Clone)]
pub struct LiftedSystem {
    pub error_system: ErrorSystem,
    pub discretized: Discretized,
    pub controller: ControllerMatrices,
    /// Plant-side stack: x̄(k+1) = Ā x̄(k) + B̄1 u(k) + B̄2 w(k).
    pub abar: Matrix,
    pub bbar1: Matrix,
    pub bbar2: Matrix,
    pub acl: Matrix,
    pub bcl: Matrix,
    pub timing: Timing,
}

impl LiftedSystem {
    /// Closed-loop state dimension, 3 + 2d.
    pub fn dim(&self) -> usize {
        3 + 2 * self.timing.d
    }

    /// Lifted state for the standard initial condition [e0, 0, 0] with
    /// quiescent input histories.
    pub fn initial_state(&self, e0: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x[0] = e0;
        x
    }

    /// One step of the delay-free recursion; `a_lead` is the predecessor
    /// acceleration sample, held over the interval (so w(k) = Γ_w a_lead).
    pub fn step(&self, x_cl: &[f64], a_lead: f64) -> Vec<f64> {
        let mut next = self.acl.matvec(x_cl);
        let w = [
            self.discretized.gamma_w[(0, 0)] * a_lead,
            self.discretized.gamma_w[(1, 0)] * a_lead,
            self.discretized.gamma_w[(2, 0)] * a_lead,
            a_lead,
        ];
        let forced = self.bcl.matvec(&w);
        for (n, f) in next.iter_mut().zip(&forced) {
            *n += f;
        }
        next
    }
}

/// Assembles the full lifted closed loop for the predictor controller.
pub fn build_lifted(
    tau: f64,
    headway: f64,
    gains: GainSet,
    timing: Timing,
) -> Result<LiftedSystem, StabilityError> {
    let error_system = build_error_system(tau, headway, gains)?;
    let discretized = discretize(&error_system, timing.ts)?;
    let controller = assemble_controller_matrices(tau, headway, gains, timing);
    let (abar, bbar1, bbar2) = plant_lift(&discretized, timing.d);
    let (acl, bcl) = closed_loop_matrix(&discretized, &controller, timing)?;
    Ok(LiftedSystem {
        error_system,
        discretized,
        controller,
        abar,
        bbar1,
        bbar2,
        acl,
        bcl,
        timing,
    })
}

/// Closed loop of the conventional (delay-free design) law running with a
/// dead time of `d` samples: dimension 3 + d, no virtual-input chain.
pub fn conventional_closed_loop(
    tau: f64,
    headway: f64,
    gains: GainSet,
    timing: Timing,
) -> Result<Matrix, StabilityError> {
    let es = build_error_system(tau, headway, gains)?;
    let disc = discretize(&es, timing.ts)?;
    let d = timing.d;
    let (abar, bbar1, _) = plant_lift(&disc, d);
    let row = direct_law_row(tau, headway, gains);
    let mut cx = Matrix::zeros(1, 3 + d);
    cx[(0, 0)] = row[0];
    cx[(0, 1)] = row[1];
    cx[(0, 2)] = row[2];
    Ok(abar.add(&bbar1.matmul(&cx)))
}

/// Three-way stability classification with the marginal guard band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Stable => write!(f, "stable"),
            Verdict::Marginal => write!(f, "marginal"),
            Verdict::Unstable => write!(f, "unstable"),
        }
    }
}

/// One eigenvalue of the closed loop, with its magnitude.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EigenvalueEntry {
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
}

/// Parameter point for stability analysis and scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisPoint {
    pub tau: f64,
    pub phi: f64,
    pub headway: f64,
    pub kp: f64,
    pub kd: f64,
    pub ts: f64,
}

impl AnalysisPoint {
    pub fn gains(&self) -> GainSet {
        GainSet {
            kp: self.kp,
            kd: self.kd,
        }
    }

    pub fn timing(&self) -> Result<Timing, Violation> {
        Timing::from_phi(self.phi, self.ts)
    }
}

/// Machine-readable stability verdict for one parameter point.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub schema_version: u32,
    pub controller: ControllerKind,
    pub tau: f64,
    pub phi: f64,
    pub headway: f64,
    pub kp: f64,
    pub kd: f64,
    pub ts: f64,
    pub delay_samples: usize,
    pub dimension: usize,
    pub spectral_radius: f64,
    /// 1 - spectral radius (negative when unstable).
    pub margin: f64,
    /// True only when the radius clears the marginal guard band.
    pub stable: bool,
    pub verdict: Verdict,
    /// Sorted by magnitude, largest first.
    pub eigenvalues: Vec<EigenvalueEntry>,
}

/// Builds the closed loop for `kind` at `point` and evaluates the
/// unit-disk criterion. Eigensolver failure surfaces here as an error —
/// the verdict must never rest on unconverged values.
pub fn stability_report(
    point: &AnalysisPoint,
    kind: ControllerKind,
) -> Result<StabilityReport, StabilityError> {
    let timing = point.timing().map_err(StabilityError::InvalidParams)?;
    let acl = match kind {
        ControllerKind::Predictor => {
            build_lifted(point.tau, point.headway, point.gains(), timing)?.acl
        }
        ControllerKind::Conventional => {
            conventional_closed_loop(point.tau, point.headway, point.gains(), timing)?
        }
    };
    let mut eigs: Vec<Complex64> = eigenvalues(&acl)?;
    eigs.sort_by(|a, b| {
        (b.norm(), b.re, b.im)
            .partial_cmp(&(a.norm(), a.re, a.im))
            .expect("finite eigenvalues")
    });
    let rho = eigs.first().map(|l| l.norm()).unwrap_or(0.0);
    let verdict = if rho < 1.0 - STABILITY_MARGIN {
        Verdict::Stable
    } else if rho > 1.0 + STABILITY_MARGIN {
        Verdict::Unstable
    } else {
        Verdict::Marginal
    };
    Ok(StabilityReport {
        schema_version: crate::config::SCHEMA_VERSION,
        controller: kind,
        tau: point.tau,
        phi: point.phi,
        headway: point.headway,
        kp: point.kp,
        kd: point.kd,
        ts: point.ts,
        delay_samples: timing.d,
        dimension: acl.rows(),
        spectral_radius: rho,
        margin: 1.0 - rho,
        stable: verdict == Verdict::Stable,
        verdict,
        eigenvalues: eigs
            .iter()
            .map(|l| EigenvalueEntry {
                re: l.re,
                im: l.im,
                magnitude: l.norm(),
            })
            .collect(),
    })
}

/// A scannable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    Kp,
    Kd,
    Headway,
    Phi,
}

impl ScanAxis {
    pub fn name(&self) -> &'static str {
        match self {
            ScanAxis::Kp => "kp",
            ScanAxis::Kd => "kd",
            ScanAxis::Headway => "headway",
            ScanAxis::Phi => "phi",
        }
    }

    pub fn parse(name: &str) -> Option<ScanAxis> {
        match name {
            "kp" => Some(ScanAxis::Kp),
            "kd" => Some(ScanAxis::Kd),
            "headway" | "h" => Some(ScanAxis::Headway),
            "phi" => Some(ScanAxis::Phi),
            _ => None,
        }
    }

    fn apply(&self, point: &mut AnalysisPoint, value: f64) {
        match self {
            ScanAxis::Kp => point.kp = value,
            ScanAxis::Kd => point.kd = value,
            ScanAxis::Headway => point.headway = value,
            ScanAxis::Phi => point.phi = value,
        }
    }
}

/// One grid dimension: an axis and the values to visit, in order.
#[derive(Debug, Clone)]
pub struct GridAxis {
    pub axis: ScanAxis,
    pub values: Vec<f64>,
}

impl GridAxis {
    /// `count` evenly spaced values over [start, stop] (inclusive);
    /// count = 1 yields just `start`.
    pub fn linspace(axis: ScanAxis, start: f64, stop: f64, count: usize) -> Self {
        let values = if count <= 1 {
            vec![start]
        } else {
            (0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect()
        };
        GridAxis { axis, values }
    }
}

/// One evaluated grid point. `values` align with the scan's axes;
/// failures are recorded in `status` and leave the numeric fields empty.
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub values: Vec<f64>,
    pub spectral_radius: Option<f64>,
    pub stable: Option<bool>,
    pub status: String,
}

/// Evaluates `stability_report` over the cartesian product of the axes,
/// row-major (last axis fastest). Per-point failures are recorded, not
/// fatal; the output order is independent of evaluation order.
pub fn gain_scan(base: AnalysisPoint, axes: &[GridAxis], kind: ControllerKind) -> Vec<ScanPoint> {
    assert!(!axes.is_empty(), "scan needs at least one axis");
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut idx = flat;
        let mut values = vec![0.0; axes.len()];
        for (slot, axis) in axes.iter().enumerate().rev() {
            let n = axis.values.len();
            values[slot] = axis.values[idx % n];
            idx /= n;
        }
        let mut point = base;
        for (axis, v) in axes.iter().zip(&values) {
            axis.axis.apply(&mut point, *v);
        }
        match stability_report(&point, kind) {
            Ok(report) => out.push(ScanPoint {
                values,
                spectral_radius: Some(report.spectral_radius),
                stable: Some(report.stable),
                status: "ok".to_string(),
            }),
            Err(e) => out.push(ScanPoint {
                values,
                spectral_radius: None,
                stable: None,
                status: e.to_string(),
            }),
        }
    }
    out
}
