//! Command-line entry points.
//!
//! Every subcommand writes a JSON summary beside its outputs and reports
//! per-item failures through [`Outcome`]; the binary exits 0 only when
//! there were none.

mod eval;
pub mod monitor;
mod prep;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use eval::EvalArgs;
pub use monitor::{BenchArgs, RunArgs, ServeArgs};
pub use prep::{CropsArgs, PrepAudioArgs, PrepDatasetArgs};

#[derive(Debug, Parser)]
#[command(name = "zwitscher", version, about = "Edge bird monitor: audio and camera species detection")]
pub struct Cli {
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn log_level(&self) -> &'static str {
        match self.verbose {
            0 => "warn",
            1 => "info",
            _ => "debug",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert audio files into quantized spectrogram (.zwsp) files.
    PrepAudio(PrepAudioArgs),
    /// Curate a sample manifest: filter, select classes, oversample, split, weight.
    PrepDataset(PrepDatasetArgs),
    /// Derive bird crops and YOLO labels from detector output.
    Crops(CropsArgs),
    /// Score classification or detection predictions.
    Eval(EvalArgs),
    /// Run the monitor: pipelines plus the detection service.
    Run(RunArgs),
    /// Serve the detection API and dashboard only.
    Serve(ServeArgs),
    /// Sweep gate thresholds over a recording and report duty cycles.
    BenchGate(BenchArgs),
}

/// Result of a subcommand that completed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Outcome {
    pub failures: usize,
}

pub fn dispatch(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::PrepAudio(a) => prep::prep_audio(&a),
        Command::PrepDataset(a) => prep::prep_dataset(&a),
        Command::Crops(a) => prep::crops(&a),
        Command::Eval(a) => eval::eval(&a),
        Command::Run(a) => monitor::run(&a),
        Command::Serve(a) => monitor::serve(&a),
        Command::BenchGate(a) => monitor::bench_gate(&a),
    }
}

/// Pretty JSON with a trailing newline.
fn write_summary<T: Serialize>(path: &Path, summary: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    crate::formats::write_text(path, &text).with_context(|| format!("writing summary {}", path.display()))
}

fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_file() {
        bail!("{what} {} is not a readable file", path.display());
    }
    Ok(())
}

fn require_dir(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_dir() {
        bail!("{what} {} is not a directory", path.display());
    }
    Ok(())
}

/// `path` with `suffix` appended to its file name.
fn beside(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Config-file and threshold flags shared by `run`, `serve` and `bench-gate`.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineFlags {
    /// Gate probability needed to run the species classifier.
    #[arg(long)]
    pub gate_threshold: Option<f64>,
    /// Audio classifier confidence that must be exceeded to report.
    #[arg(long)]
    pub species_report_threshold: Option<f64>,
    /// Image classifier confidence that must be exceeded to report.
    #[arg(long)]
    pub image_report_threshold: Option<f64>,
    /// Segment length in seconds.
    #[arg(long)]
    pub segment_seconds: Option<f64>,
    /// Segment advance in seconds.
    #[arg(long)]
    pub segment_hop_seconds: Option<f64>,
}
