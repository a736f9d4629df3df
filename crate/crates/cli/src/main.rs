//! `sgs`: simulate, replay, inspect and serve the social-gaze engine.

mod output;
mod serve;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sgs_core::replay::replay_jsonl;
use sgs_core::session::Clock;
use sgs_core::simulator::{self, Scenario};
use sgs_core::trace::{compute_metrics, read_jsonl, to_jsonl};
use sgs_core::{EngineConfig, Metrics, TraceRecord};

use crate::output::write_atomic;

#[derive(Debug, Parser)]
#[command(name = "sgs", version, about = "Social gaze engine: simulator, replay analyzer and session server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its trace.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        metrics_format: Format,
        /// Also write the sensor frames the engine ingested.
        #[arg(long)]
        frames: Option<PathBuf>,
    },
    /// Classify recorded sensor frames into a state log.
    Replay {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long, env = "SGS_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a trace file.
    Metrics {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve live sessions over WebSocket (`/session`) and NDJSON over TCP on one port.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "SGS_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ClockArg::Wall)]
        clock: ClockArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClockArg {
    Wall,
    Frames,
}

impl From<ClockArg> for Clock {
    fn from(c: ClockArg) -> Self {
        match c {
            ClockArg::Wall => Clock::Wall,
            ClockArg::Frames => Clock::Frames,
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn config(path: &Path, err: impl std::fmt::Display) -> Self {
        Failure::Config(format!("{}: {err}", path.display()))
    }

    fn runtime(path: &Path, err: impl std::fmt::Display) -> Self {
        Failure::Runtime(format!("{}: {err}", path.display()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("sgs: config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("sgs: error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { scenario, seed, out, metrics, metrics_format, frames } => {
            simulate(&scenario, seed, &out, metrics.as_deref(), metrics_format, frames.as_deref())
        }
        Command::Replay { frames, config, out } => replay(&frames, config.as_deref(), &out),
        Command::Metrics { trace, format, out } => metrics(&trace, format, out.as_deref()),
        Command::Serve { port, host, config, clock } => {
            let config = load_config(config.as_deref())?;
            serve::run(&host, port, config, clock.into()).map_err(|e| Failure::Runtime(format!("{e:#}")))
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig, Failure> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::config(p, e))?;
            EngineConfig::from_json(&text).map_err(|e| Failure::config(p, e))
        }
        None => Ok(EngineConfig::default()),
    }
}

fn render_metrics(m: &Metrics, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(m).expect("metrics serialize");
            s.push('\n');
            s
        }
        Format::Table => m.to_table(),
    }
}

fn simulate(
    scenario_path: &Path,
    seed: Option<u64>,
    out: &Path,
    metrics_path: Option<&Path>,
    format: Format,
    frames_path: Option<&Path>,
) -> Result<(), Failure> {
    let text = std::fs::read_to_string(scenario_path).map_err(|e| Failure::config(scenario_path, e))?;
    let scenario = Scenario::from_json(&text).map_err(|e| Failure::config(scenario_path, e))?;
    scenario.validate().map_err(|e| Failure::config(scenario_path, e))?;

    let output = simulator::run(&scenario, seed).map_err(|e| Failure::runtime(scenario_path, e))?;
    // Render everything before touching the filesystem.
    let trace = to_jsonl(&output.trace);
    let metrics = match metrics_path {
        Some(_) => Some(compute_metrics(&output.trace).map_err(|e| Failure::runtime(scenario_path, e))?),
        None => None,
    };

    write_atomic(out, trace.as_bytes()).map_err(|e| Failure::runtime(out, e))?;
    if let (Some(path), Some(m)) = (metrics_path, metrics) {
        write_atomic(path, render_metrics(&m, format).as_bytes()).map_err(|e| Failure::runtime(path, e))?;
    }
    if let Some(path) = frames_path {
        write_atomic(path, to_jsonl(&output.frames).as_bytes()).map_err(|e| Failure::runtime(path, e))?;
    }
    Ok(())
}

fn replay(frames: &Path, config: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let config = load_config(config)?;
    let file = File::open(frames).map_err(|e| Failure::runtime(frames, e))?;
    let states = replay_jsonl(BufReader::new(file), &config).map_err(|e| Failure::runtime(frames, e))?;
    write_atomic(out, to_jsonl(&states).as_bytes()).map_err(|e| Failure::runtime(out, e))
}

fn metrics(trace: &Path, format: Format, out: Option<&Path>) -> Result<(), Failure> {
    let file = File::open(trace).map_err(|e| Failure::runtime(trace, e))?;
    let records: Vec<TraceRecord> = read_jsonl(BufReader::new(file)).map_err(|e| Failure::runtime(trace, e))?;
    let m = compute_metrics(&records).map_err(|e| Failure::runtime(trace, e))?;
    let text = render_metrics(&m, format);
    match out {
        Some(path) => write_atomic(path, text.as_bytes()).map_err(|e| Failure::runtime(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
