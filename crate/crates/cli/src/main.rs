//! `platoon` — scenario runner, stability reports, gain scans and
//! controller comparisons, all with machine-readable outputs.
//!
//! Exit codes: 0 ok/stable, 1 unstable or marginal, 2 invalid input,
//! 3 numerical failure. Human-readable summaries go to stdout; data goes
//! to files (CSV logs, JSON reports).

use clap::{Args, Parser, Subcommand};
use platoon::config::{load_scenario, ConfigError, ControllerKind, ScenarioConfig, SCHEMA_VERSION};
use platoon::sim::{
    response_metrics, run_platoon_sim, run_reference_sim, FollowerMetrics, ReferenceModel,
    SignalPeak, SimError, TimeSeriesLog,
};
use platoon::stability::{
    gain_scan, stability_report, AnalysisPoint, GridAxis, ScanAxis, StabilityError,
    StabilityReport, Verdict,
};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_OK: u8 = 0;
const EXIT_UNSTABLE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "platoon",
    version,
    about = "Vehicle-platoon simulation and stability analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the CSV log plus a JSON run report.
    Simulate(SimulateArgs),
    /// Evaluate the closed-loop unit-disk stability test at one parameter point.
    Stability(StabilityArgs),
    /// Map spectral radius over a parameter grid, CSV output.
    Scan(ScanArgs),
    /// Run a scenario under both controllers plus the two continuous
    /// references; write all four logs and a comparison report.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario document (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct StabilityArgs {
    /// Take parameters from a scenario's first follower instead of flags.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    point: PointArgs,
    /// Which control law to analyze.
    #[arg(long, default_value = "predictor")]
    controller: ControllerArg,
    /// Optional output directory for the JSON report (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Grid spec: `name=start:stop:count[,name=start:stop:count]` with
    /// names from kp, kd, headway, phi (at most two axes).
    #[arg(long)]
    grid: String,
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, default_value = "predictor")]
    controller: ControllerArg,
    /// Optional output directory for scan.csv (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Base parameter point; defaults are the reference experiment's values.
#[derive(Args, Clone, Copy)]
struct PointArgs {
    /// Driveline time constant, s.
    #[arg(long, default_value_t = 0.067)]
    tau: f64,
    /// Actuation delay, s (must be a multiple of ts).
    #[arg(long, default_value_t = 0.15)]
    phi: f64,
    /// Headway, s.
    #[arg(long, default_value_t = 0.5)]
    headway: f64,
    /// Proportional gain, 1/s².
    #[arg(long, default_value_t = 0.2)]
    kp: f64,
    /// Derivative gain, 1/s.
    #[arg(long, default_value_t = 0.6866)]
    kd: f64,
    /// Controller sampling time, s.
    #[arg(long, default_value_t = 0.01)]
    ts: f64,
}

impl PointArgs {
    fn analysis_point(&self) -> AnalysisPoint {
        AnalysisPoint {
            tau: self.tau,
            phi: self.phi,
            headway: self.headway,
            kp: self.kp,
            kd: self.kd,
            ts: self.ts,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ControllerArg {
    Predictor,
    Conventional,
}

impl From<ControllerArg> for ControllerKind {
    fn from(a: ControllerArg) -> Self {
        match a {
            ControllerArg::Predictor => ControllerKind::Predictor,
            ControllerArg::Conventional => ControllerKind::Conventional,
        }
    }
}

/// Command failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::invalid(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) => Failure::invalid(e.to_string()),
            SimError::NonFinite { .. } | SimError::FractionalDelay { .. } => {
                Failure::numerical(e.to_string())
            }
        }
    }
}

impl From<StabilityError> for Failure {
    fn from(e: StabilityError) -> Self {
        match e {
            StabilityError::InvalidParams(_) => Failure::invalid(e.to_string()),
            StabilityError::Numerics(_) => Failure::numerical(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Stability(args) => cmd_stability(&args),
        Command::Scan(args) => cmd_scan(&args),
        Command::Compare(args) => cmd_compare(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message.trim_end());
            ExitCode::from(failure.code)
        }
    }
}

fn read_scenario(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {}", path.display(), e)))?;
    Ok(load_scenario(&text)?)
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::invalid(format!("cannot create {}: {}", dir.display(), e)))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .map_err(|e| Failure::invalid(format!("cannot write {}: {}", path.display(), e)))
}

/// Per-follower section of a run report.
#[derive(Serialize)]
struct FollowerReport {
    vehicle: usize,
    controller: ControllerKind,
    delay_samples: usize,
    metrics: FollowerMetrics,
    stability: StabilityReport,
}

#[derive(Serialize)]
struct RunReport {
    schema_version: u32,
    scenario_path: String,
    scenario: ScenarioConfig,
    samples: usize,
    followers: Vec<FollowerReport>,
    outputs: Vec<String>,
    wall_clock_seconds: f64,
}

fn follower_reports(
    cfg: &ScenarioConfig,
    log: &TimeSeriesLog,
) -> Result<Vec<FollowerReport>, Failure> {
    let metrics = response_metrics(log);
    let mut out = Vec::new();
    for m in metrics {
        let entry = &cfg.vehicles[m.vehicle];
        let point = AnalysisPoint {
            tau: entry.tau,
            phi: entry.phi,
            headway: entry.headway,
            kp: entry.kp,
            kd: entry.kd,
            ts: cfg.ts,
        };
        let stability = stability_report(&point, entry.controller)?;
        out.push(FollowerReport {
            vehicle: m.vehicle,
            controller: entry.controller,
            delay_samples: stability.delay_samples,
            metrics: m,
            stability,
        });
    }
    Ok(out)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let start = Instant::now();
    let cfg = read_scenario(&args.scenario)?;
    let log = run_platoon_sim(&cfg)?;
    ensure_dir(&args.out)?;

    let log_path = args.out.join("log.csv");
    write_file(&log_path, &log.to_csv_string())?;

    let followers = follower_reports(&cfg, &log)?;
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        scenario_path: args.scenario.display().to_string(),
        scenario: cfg,
        samples: log.len(),
        followers,
        outputs: vec![log_path.display().to_string()],
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let report_path = args.out.join("report.json");
    write_file(&report_path, &to_json(&report)?)?;

    println!("simulated {} samples", report.samples);
    for f in &report.followers {
        println!(
            "vehicle {} ({}): peak |x1| = {:.6} m, spectral radius = {:.6} ({})",
            f.vehicle,
            f.controller,
            f.metrics.peak_abs_x1,
            f.stability.spectral_radius,
            f.stability.verdict
        );
    }
    println!("wrote {}", log_path.display());
    println!("wrote {}", report_path.display());
    Ok(EXIT_OK)
}

fn cmd_stability(args: &StabilityArgs) -> Result<u8, Failure> {
    let (point, kind) = match &args.scenario {
        Some(path) => {
            let cfg = read_scenario(path)?;
            let entry = &cfg.vehicles[1];
            let point = AnalysisPoint {
                tau: entry.tau,
                phi: entry.phi,
                headway: entry.headway,
                kp: entry.kp,
                kd: entry.kd,
                ts: cfg.ts,
            };
            (point, entry.controller)
        }
        None => (args.point.analysis_point(), args.controller.into()),
    };
    let report = stability_report(&point, kind)?;
    let json = to_json(&report)?;

    println!(
        "controller {}: dimension {}, spectral radius {:.9}, verdict {}",
        report.controller, report.dimension, report.spectral_radius, report.verdict
    );
    for e in report.eigenvalues.iter().take(5) {
        println!(
            "  lambda = {:+.9} {:+.9}i  (|lambda| = {:.9})",
            e.re, e.im, e.magnitude
        );
    }
    if report.dimension > 5 {
        println!("  ... {} eigenvalues total", report.dimension);
    }
    match &args.out {
        Some(dir) => {
            ensure_dir(dir)?;
            let path = dir.join("stability.json");
            write_file(&path, &json)?;
            println!("wrote {}", path.display());
        }
        None => print!("{}", json),
    }
    Ok(match report.verdict {
        Verdict::Stable => EXIT_OK,
        Verdict::Marginal | Verdict::Unstable => EXIT_UNSTABLE,
    })
}

fn parse_grid(spec: &str) -> Result<Vec<GridAxis>, Failure> {
    let mut axes = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        let (name, range) = part.split_once('=').ok_or_else(|| {
            Failure::invalid(format!("grid axis `{part}` is not name=start:stop:count"))
        })?;
        let axis = ScanAxis::parse(name.trim()).ok_or_else(|| {
            Failure::invalid(format!(
                "unknown grid axis `{}` (use kp, kd, headway, phi)",
                name
            ))
        })?;
        let fields: Vec<&str> = range.split(':').collect();
        if fields.len() != 3 {
            return Err(Failure::invalid(format!(
                "grid range `{range}` is not start:stop:count"
            )));
        }
        let start: f64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| Failure::invalid(format!("bad grid start `{}`", fields[0])))?;
        let stop: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| Failure::invalid(format!("bad grid stop `{}`", fields[1])))?;
        let count: usize = fields[2]
            .trim()
            .parse()
            .map_err(|_| Failure::invalid(format!("bad grid count `{}`", fields[2])))?;
        if count == 0 || !start.is_finite() || !stop.is_finite() {
            return Err(Failure::invalid("grid needs finite bounds and count >= 1"));
        }
        axes.push(GridAxis::linspace(axis, start, stop, count));
    }
    if axes.is_empty() || axes.len() > 2 {
        return Err(Failure::invalid("grid must have one or two axes"));
    }
    Ok(axes)
}

fn scan_csv(axes: &[GridAxis], points: &[platoon::stability::ScanPoint]) -> String {
    let mut out = String::new();
    let names: Vec<&str> = axes.iter().map(|a| a.axis.name()).collect();
    out.push_str(&names.join(","));
    out.push_str(",spectral_radius,stable,status\n");
    for p in points {
        for v in &p.values {
            out.push_str(&format!("{:.14e},", v));
        }
        match p.spectral_radius {
            Some(rho) => out.push_str(&format!("{:.14e},", rho)),
            None => out.push(','),
        }
        match p.stable {
            Some(s) => out.push_str(&format!("{},", s)),
            None => out.push(','),
        }
        out.push('"');
        out.push_str(&p.status.replace('"', "'").replace('\n', " "));
        out.push_str("\"\n");
    }
    out
}

fn cmd_scan(args: &ScanArgs) -> Result<u8, Failure> {
    let axes = parse_grid(&args.grid)?;
    let points = gain_scan(args.point.analysis_point(), &axes, args.controller.into());
    let csv = scan_csv(&axes, &points);
    let stable = points.iter().filter(|p| p.stable == Some(true)).count();
    let failed = points.iter().filter(|p| p.status != "ok").count();
    println!(
        "{} grid points: {} stable, {} failed",
        points.len(),
        stable,
        failed
    );
    match &args.out {
        Some(dir) => {
            ensure_dir(dir)?;
            let path = dir.join("scan.csv");
            write_file(&path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{}", csv),
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VariantReport {
    file: String,
    metrics: Vec<FollowerMetrics>,
}

#[derive(Serialize)]
struct ReferenceReport {
    file: String,
    peak_abs_x1: SignalPeak,
    peak_abs_x3: SignalPeak,
}

#[derive(Serialize)]
struct CompareReport {
    schema_version: u32,
    scenario_path: String,
    scenario: ScenarioConfig,
    predictor: VariantReport,
    conventional: VariantReport,
    reference_compensated: ReferenceReport,
    reference_delayed: ReferenceReport,
    /// Peak-|x3| ratio of the delayed reference over the compensated one.
    peak_x3_ratio: f64,
    outputs: Vec<String>,
}

fn cmd_compare(args: &CompareArgs) -> Result<u8, Failure> {
    let cfg = read_scenario(&args.scenario)?;
    ensure_dir(&args.out)?;

    let with_kind = |kind: ControllerKind| -> ScenarioConfig {
        let mut c = cfg.clone();
        for v in c.vehicles.iter_mut().skip(1) {
            v.controller = kind;
        }
        c
    };
    let pred_cfg = with_kind(ControllerKind::Predictor);
    let conv_cfg = with_kind(ControllerKind::Conventional);
    let pred_log = run_platoon_sim(&pred_cfg)?;
    let conv_log = run_platoon_sim(&conv_cfg)?;

    // continuous references for the first follower
    let entry = &cfg.vehicles[1];
    let ts_fine = cfg.ts / 10.0;
    let comp_ref = run_reference_sim(
        ReferenceModel::Predictor,
        &entry.params(),
        entry.gains(),
        entry.initial_error,
        &cfg.leader_profile,
        cfg.duration,
        ts_fine,
    )?;
    let delay_ref = run_reference_sim(
        ReferenceModel::Conventional,
        &entry.params(),
        entry.gains(),
        entry.initial_error,
        &cfg.leader_profile,
        cfg.duration,
        ts_fine,
    )?;

    let files = [
        ("predictor.csv", pred_log.to_csv_string()),
        ("conventional.csv", conv_log.to_csv_string()),
        ("reference_compensated.csv", comp_ref.to_csv_string()),
        ("reference_delayed.csv", delay_ref.to_csv_string()),
    ];
    let mut outputs = Vec::new();
    for (name, contents) in &files {
        let path = args.out.join(name);
        write_file(&path, contents)?;
        outputs.push(path.display().to_string());
    }

    let ratio = delay_ref.peak_abs_x3().value / comp_ref.peak_abs_x3().value;
    let report = CompareReport {
        schema_version: SCHEMA_VERSION,
        scenario_path: args.scenario.display().to_string(),
        scenario: cfg,
        predictor: VariantReport {
            file: outputs[0].clone(),
            metrics: response_metrics(&pred_log),
        },
        conventional: VariantReport {
            file: outputs[1].clone(),
            metrics: response_metrics(&conv_log),
        },
        reference_compensated: ReferenceReport {
            file: outputs[2].clone(),
            peak_abs_x1: comp_ref.peak_abs_x1(),
            peak_abs_x3: comp_ref.peak_abs_x3(),
        },
        reference_delayed: ReferenceReport {
            file: outputs[3].clone(),
            peak_abs_x1: delay_ref.peak_abs_x1(),
            peak_abs_x3: delay_ref.peak_abs_x3(),
        },
        peak_x3_ratio: ratio,
        outputs: outputs.clone(),
    };
    let report_path = args.out.join("compare_report.json");
    write_file(&report_path, &to_json(&report)?)?;

    println!("peak |x3| ratio (delayed / compensated): {:.6}", ratio);
    for o in &outputs {
        println!("wrote {}", o);
    }
    println!("wrote {}", report_path.display());
    Ok(EXIT_OK)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Failure::numerical(format!("report serialization failed: {}", e)))
}
