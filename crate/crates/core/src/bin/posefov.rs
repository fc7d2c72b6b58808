use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use posefov::cli::{cmd_eval, cmd_process, cmd_synth, process_summary, CliError, EvalArgs, ProcessArgs};

/// Lift 2D poses into 3D, estimate torso and gaze headings, and test who can
/// see the camera.
#[derive(Parser)]
#[command(name = "posefov", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a recording and write one JSON line per tracked person per frame.
    Process {
        /// Recording directory (intrinsics.json, frames.jsonl, depth/).
        #[arg(long)]
        input: PathBuf,
        /// Results file (JSON lines).
        #[arg(long)]
        output: PathBuf,
        /// Config JSON; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Horizontal field of view in degrees [default: 120, or the config value].
        #[arg(long)]
        fov_deg: Option<f64>,
    },
    /// Generate a synthetic recording together with its ground truth.
    Synth {
        /// Scenario JSON; the default is a 10 s noiseless walk_straight.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare results against ground truth; prints a table and writes a JSON report.
    Eval {
        /// Results file written by `process`.
        #[arg(long)]
        results: PathBuf,
        /// Ground-truth directory (gt.jsonl, extrinsics.json).
        #[arg(long)]
        gt: PathBuf,
        /// Report file (JSON).
        #[arg(long)]
        report: PathBuf,
        /// Time-alignment tolerance in seconds.
        #[arg(long, default_value_t = 1.0 / 60.0)]
        tolerance: f64,
        /// Config JSON (field of view and leveling); built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Horizontal field of view in degrees [default: 120, or the config value].
        #[arg(long)]
        fov_deg: Option<f64>,
        /// Also write per-frame plot arrows (gaze red, torso green) as JSON lines.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Process { input, output, config, fov_deg } => {
            let stats = cmd_process(&ProcessArgs { input, output, config, fov_deg })?;
            println!("{}", process_summary(&stats));
        }
        Command::Synth { scenario, out } => {
            let n = cmd_synth(scenario.as_deref(), &out)?;
            println!("wrote {n} frames to {}", out.display());
        }
        Command::Eval { results, gt, report, tolerance, config, fov_deg, overlay } => {
            let r = cmd_eval(&EvalArgs { results, gt, report, tolerance, config, fov_deg, overlay })?;
            print!("{}", r.table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
