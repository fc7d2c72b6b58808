//! The `posefov` subcommands, minus argument parsing.
//!
//! Exit codes: 0 success, 1 unreadable or malformed input, 2 bad
//! configuration.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::eval::{evaluate, write_overlay, EvalConfig, EvalReport};
use crate::geometry::CameraIntrinsics;
use crate::io::{read_ground_truth, read_results, FormatError, Recording, ResultWriter};
use crate::pipeline::{process_recording, ProcessError, RunStats};
use crate::synth::{generate, Scenario, SynthError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Input(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ProcessError> for CliError {
    fn from(e: ProcessError) -> Self {
        match e {
            ProcessError::Format(e) => e.into(),
            ProcessError::Config(e) => e.into(),
            ProcessError::Output(_) => CliError::Input(e.to_string()),
        }
    }
}

fn output_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

/// Loads `path` (or the defaults) and applies a `--fov-deg` override.
pub fn load_config(path: Option<&Path>, fov_deg: Option<f64>) -> Result<Config, CliError> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(d) = fov_deg {
        cfg.fov.horizontal_deg = d;
        cfg.validate()?;
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Default)]
pub struct ProcessArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub config: Option<PathBuf>,
    pub fov_deg: Option<f64>,
}

pub fn cmd_process(args: &ProcessArgs) -> Result<RunStats, CliError> {
    let cfg = load_config(args.config.as_deref(), args.fov_deg)?;
    let recording = Recording::open(&args.input)?;
    let mut writer = ResultWriter::create(&args.output).map_err(output_err(&args.output))?;
    let stats = process_recording(&recording, &cfg, |r| writer.write(r))?;
    writer.finish().map_err(output_err(&args.output))?;
    Ok(stats)
}

pub fn process_summary(stats: &RunStats) -> String {
    format!(
        "frames: {}  tracks: {}  records: {}  valid gaze: {:.1}%",
        stats.frames,
        stats.tracks,
        stats.records,
        100.0 * stats.gaze_valid_fraction()
    )
}

pub fn load_scenario(path: Option<&Path>) -> Result<Scenario, CliError> {
    let Some(path) = path else { return Ok(Scenario::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Scenario::from_json_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Generates a scenario into `out`; returns the number of frames written.
pub fn cmd_synth(scenario: Option<&Path>, out: &Path) -> Result<usize, CliError> {
    let s = load_scenario(scenario)?;
    let k = s.intrinsics.unwrap_or_else(CameraIntrinsics::realsense_720p);
    let syn = generate(&s, &k).map_err(|e| CliError::Config(e.to_string()))?;
    syn.write(out).map_err(|e| match e {
        SynthError::InvalidScenario(m) => CliError::Config(m),
        SynthError::Format(e) => e.into(),
    })?;
    Ok(syn.frame_count())
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub results: PathBuf,
    pub gt: PathBuf,
    pub report: PathBuf,
    /// Seconds.
    pub tolerance: f64,
    pub config: Option<PathBuf>,
    pub fov_deg: Option<f64>,
    pub overlay: Option<PathBuf>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport, CliError> {
    if !(args.tolerance >= 0.0 && args.tolerance.is_finite()) {
        return Err(CliError::Config(format!("tolerance must be >= 0, got {}", args.tolerance)));
    }
    let cfg = load_config(args.config.as_deref(), args.fov_deg)?;
    let results = read_results(&args.results)?;
    let gt = read_ground_truth(&args.gt)?;
    let eval_cfg = EvalConfig { tolerance: args.tolerance, fov: cfg.fov_config()?, conv: cfg.frame_convention()? };
    let report = evaluate(&results, &gt, &eval_cfg).map_err(|e| CliError::Input(e.to_string()))?;

    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    std::fs::write(&args.report, text).map_err(output_err(&args.report))?;
    if let Some(path) = &args.overlay {
        let file = File::create(path).map_err(output_err(path))?;
        write_overlay(&results, BufWriter::new(file)).map_err(output_err(path))?;
    }
    Ok(report)
}
