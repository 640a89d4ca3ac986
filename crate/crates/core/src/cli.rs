//! `memlab` command-line front end.
//!
//! Exit codes: 0 success, 2 unreadable or invalid input (including bad
//! arguments), 3 failure while simulating, analysing or writing results.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::analyze::{
    area_monotonicity, frequency_sweep, half_period_fits, linearity_fit, loop_area, phi_q_classify,
    pinch_test, AnalysisError, LinearFit, LoopArea, Monotonicity, PhiQClassification, PinchReport,
    SweepRow, DEFAULT_PHI_Q_TOL,
};
use crate::expdsl::{self, parse_experiment, ExperimentConfig};
use crate::integrate::{simulate_steady, SimControls, SimError};
use crate::models::Model;
use crate::oneport::{Drive, Trajectory};

pub const SCHEMA_VERSION: u32 = 1;

/// JSON schema of [`RunReport`].
pub const RUN_REPORT_SCHEMA: &str = include_str!("../schema/run_report.schema.json");
/// JSON schema of [`SweepReport`].
pub const SWEEP_REPORT_SCHEMA: &str = include_str!("../schema/sweep_report.schema.json");

/// Pinch tolerances relative to the largest |i| and |v| of the record.
pub const PINCH_REL_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "memlab",
    version,
    about = "Simulate and analyse memristive one-ports"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one experiment and write its trajectory and report.
    Run(RunArgs),
    /// Run the frequency sweep requested by an experiment.
    Sweep(RunArgs),
    /// List the built-in presets.
    List,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment file.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    pub file: Option<PathBuf>,
    /// Built-in preset name (see `memlab list`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, env = "MEMLAB_OUT", default_value = ".")]
    pub out: PathBuf,
    /// Replace the experiment's integration step, s.
    #[arg(long, value_name = "X")]
    pub dt_override: Option<f64>,
    /// Include wall-clock time in the JSON report (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("analysis failed: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } | CliError::Invalid(_) => 2,
            CliError::Sim(_) | CliError::Analysis(_) | CliError::Write { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Linearity {
    pub whole: LinearFit,
    /// Fits over the `(0, T/2]` and `(T/2, T]` halves of each period.
    pub half_periods: [LinearFit; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub experiment: String,
    pub model: Model,
    pub drive: Drive,
    pub controls: SimControls,
    /// Step actually used, after alignment to the drive period.
    pub dt: f64,
    pub samples_per_cycle: usize,
    pub cycles: usize,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pinch: Option<PinchReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loop_areas: Option<Vec<LoopArea>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_q: Option<PhiQClassification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linearity: Option<Linearity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub experiment: String,
    pub model: Model,
    pub drive: Drive,
    pub controls: SimControls,
    pub rows: Vec<SweepRow>,
    pub monotonicity: Monotonicity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

/// Parsed experiment plus where it came from, for diagnostics.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub origin: String,
}

pub fn load(args: &RunArgs) -> Result<Loaded, CliError> {
    let (text, origin) = match (&args.file, &args.preset) {
        (_, Some(name)) => {
            let src = expdsl::preset_source(name).ok_or_else(|| CliError::Input {
                path: format!("preset {name}"),
                message: "no such preset (see `memlab list`)".into(),
            })?;
            (src.to_string(), format!("preset {name}"))
        }
        (Some(path), None) => {
            let origin = path.display().to_string();
            let text = fs::read_to_string(path).map_err(|e| CliError::Input {
                path: origin.clone(),
                message: e.to_string(),
            })?;
            (text, origin)
        }
        (None, None) => {
            return Err(CliError::Invalid(
                "give an experiment file or --preset".into(),
            ))
        }
    };
    let parsed = parse_experiment(&text).map_err(|e| CliError::Input {
        path: origin.clone(),
        message: e.to_string(),
    })?;
    let mut config = parsed.config;
    if let Some(dt) = args.dt_override {
        config.controls.dt = dt;
        config.controls.event_tolerance = config.controls.event_tolerance.min(dt * 1e-9);
        config
            .controls
            .validate(config.drive.period())
            .map_err(|e| CliError::Invalid(format!("--dt-override {dt}: {e}")))?;
    }
    Ok(Loaded {
        config,
        warnings: parsed.warnings,
        origin,
    })
}

/// Simulates to steady state and computes the requested analyses.
pub fn run_experiment(
    config: &ExperimentConfig,
    warnings: Vec<String>,
) -> Result<(Trajectory, RunReport), CliError> {
    let traj = simulate_steady(&config.model, &config.drive, &config.controls)?;
    let a = &config.analyses;
    let pinch = if a.pinch {
        Some(pinch_test(
            &traj,
            PINCH_REL_TOL * traj.max_abs_i(),
            PINCH_REL_TOL * traj.max_abs_v(),
        )?)
    } else {
        None
    };
    let loop_areas = if a.loop_area {
        let areas: Result<Vec<_>, _> = (0..traj.cycles())
            .map(|k| loop_area(&traj.cycle(k).expect("cycle in range")))
            .collect();
        Some(areas?)
    } else {
        None
    };
    let phi_q = if a.phi_q {
        Some(phi_q_classify(&traj, DEFAULT_PHI_Q_TOL)?)
    } else {
        None
    };
    let linearity = if a.linearity {
        Some(Linearity {
            whole: linearity_fit(&traj)?,
            half_periods: half_period_fits(&traj)?,
        })
    } else {
        None
    };
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        experiment: config.name.clone(),
        model: config.model,
        drive: config.drive,
        controls: config.controls,
        dt: traj.dt,
        samples_per_cycle: traj.samples_per_cycle,
        cycles: traj.cycles(),
        warnings,
        pinch,
        loop_areas,
        phi_q,
        linearity,
        wall_time_s: None,
    };
    Ok((traj, report))
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Trajectory as CSV: `t,u,y,v,i,phi,q,state0[,state1...]`, shortest
/// round-trip float formatting.
pub fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>, csv::Error> {
    let dim = traj.samples.first().map_or(0, |r| r.state.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["t", "u", "y", "v", "i", "phi", "q"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..dim).map(|k| format!("state{k}")));
    w.write_record(&header)?;
    for r in &traj.samples {
        let mut row = vec![
            num(r.t),
            num(r.u),
            num(r.y),
            num(r.v),
            num(r.i),
            num(r.phi),
            num(r.q),
        ];
        row.extend(r.state.iter().map(|x| num(*x)));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "f",
        "normalized_area",
        "kind",
        "dq_per_cycle",
        "dphi_per_cycle",
    ])?;
    for r in rows {
        let kind = serde_json::to_value(r.classification.kind).expect("enum serializes");
        w.write_record([
            num(r.frequency),
            num(r.normalized_area),
            kind.as_str().unwrap_or_default().to_string(),
            num(r.classification.dq_per_cycle),
            num(r.classification.dphi_per_cycle),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let wrap = |source| CliError::Write {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(wrap)?;
    }
    fs::write(&path, bytes).map_err(wrap)?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report serializes");
    out.push(b'\n');
    out
}

fn csv_bytes(r: Result<Vec<u8>, csv::Error>, name: &str) -> Result<Vec<u8>, CliError> {
    r.map_err(|e| CliError::Write {
        path: name.to_string(),
        source: std::io::Error::other(e),
    })
}

pub fn cmd_run(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let Loaded {
        config,
        warnings,
        origin,
    } = load(args)?;
    for w in &warnings {
        eprintln!("warning: {origin}: {w}");
    }
    let start = Instant::now();
    let (traj, mut report) = run_experiment(&config, warnings)?;
    if args.timing {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    let csv_name = config
        .outputs
        .csv
        .clone()
        .unwrap_or_else(|| format!("{}.csv", config.name));
    let json_name = config
        .outputs
        .json
        .clone()
        .unwrap_or_else(|| format!("{}.json", config.name));
    let csv = csv_bytes(trajectory_csv(&traj), &csv_name)?;
    let json = to_json(&report);
    Ok(vec![
        write_file(&args.out, &csv_name, &csv)?,
        write_file(&args.out, &json_name, &json)?,
    ])
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport, CliError> {
    let freqs = config.analyses.sweep.as_ref().ok_or_else(|| {
        CliError::Invalid(format!("experiment {} requests no sweep", config.name))
    })?;
    let rows = frequency_sweep(&config.model, &config.drive, freqs, &config.controls).map_err(
        |e| match e {
            AnalysisError::Frequencies => {
                CliError::Invalid("frequencies must be strictly increasing".into())
            }
            other => CliError::Analysis(other),
        },
    )?;
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        experiment: config.name.clone(),
        model: config.model,
        drive: config.drive,
        controls: config.controls,
        monotonicity: area_monotonicity(&rows),
        rows,
        wall_time_s: None,
    })
}

pub fn cmd_sweep(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let Loaded {
        config,
        warnings,
        origin,
    } = load(args)?;
    for w in &warnings {
        eprintln!("warning: {origin}: {w}");
    }
    let start = Instant::now();
    let mut report = run_sweep(&config)?;
    if args.timing {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    let csv_name = format!("{}_sweep.csv", config.name);
    let json_name = format!("{}_sweep.json", config.name);
    let csv = csv_bytes(sweep_csv(&report.rows), &csv_name)?;
    let json = to_json(&report);
    Ok(vec![
        write_file(&args.out, &csv_name, &csv)?,
        write_file(&args.out, &json_name, &json)?,
    ])
}

/// Preset listing, one `name  description` line each, sorted by name.
pub fn preset_listing() -> String {
    let width = expdsl::PRESETS
        .iter()
        .map(|(n, _, _)| n.len())
        .max()
        .unwrap_or(0);
    expdsl::PRESETS
        .iter()
        .map(|(n, d, _)| format!("{n:width$}  {d}\n"))
        .collect()
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::List => {
            print!("{}", preset_listing());
            return 0;
        }
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("memlab: {e}");
            e.exit_code()
        }
    }
}
