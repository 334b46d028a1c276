use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use tickhurst_core::synth::{SynthError, SynthKind, SynthSpec};

mod commands;
mod config;
mod inputs;
mod report;

use commands::{Outcome, UsageError};
use config::{read_config_file, ConfigError, RunConfig};

/// Hurst exponents of tick traded-value series.
#[derive(Debug, Parser)]
#[command(name = "tickhurst", version)]
struct Cli {
    /// More log output (repeatable). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter tapes and write bucketed traded-value series plus drop counts.
    Ingest(Common),
    /// Daily Hurst estimates, logscale diagrams and monthly roll-ups.
    Analyze(Common),
    /// Per-size-bucket estimates and trade-count proportions.
    Buckets(Common),
    /// Estimates before and after shuffling each session's buckets.
    ShuffleCheck(Common),
    /// Generate a synthetic series with a JSON sidecar.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "white")]
        kind: String,
        #[arg(long = "target-h", default_value_t = 0.5)]
        target_h: f64,
        #[arg(long, default_value_t = 23_400)]
        length: usize,
        #[arg(long = "mix-weight", default_value_t = 0.0)]
        mix_weight: f64,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Session files, directories or glob patterns; replaces the `inputs` key.
    inputs: Vec<String>,
    /// Flat `key = value` config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output_dir: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Bucket width in seconds.
    #[arg(long)]
    delta_t: Option<String>,
    #[arg(long)]
    j1: Option<u32>,
    #[arg(long)]
    j2: Option<u32>,
    #[arg(long)]
    max_octave: Option<u32>,
    /// e.g. `small=1..249;large=1500..`
    #[arg(long)]
    size_buckets: Option<String>,
    /// percentile or mean2sd.
    #[arg(long)]
    monthly_band: Option<String>,
    /// raw or bias_corrected.
    #[arg(long)]
    logscale_mode: Option<String>,
    /// Column order, e.g. `time,price,size,cond,corr,ex`.
    #[arg(long)]
    schema: Option<String>,
    /// Any other config key, as KEY=VALUE (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut layers = Vec::new();
        if let Some(path) = &self.config {
            layers.push(read_config_file(path)?);
        }
        let mut flags: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k.to_string(), v));
            }
        };
        put("output_dir", self.output_dir.clone());
        put("format", self.format.clone());
        put("seed", self.seed.map(|v| v.to_string()));
        put("workers", self.workers.map(|v| v.to_string()));
        put("delta_t", self.delta_t.clone());
        put("j1", self.j1.map(|v| v.to_string()));
        put("j2", self.j2.map(|v| v.to_string()));
        put("max_octave", self.max_octave.map(|v| v.to_string()));
        put("size_buckets", self.size_buckets.clone());
        put("monthly_band", self.monthly_band.clone());
        put("logscale_mode", self.logscale_mode.clone());
        put("schema", self.schema.clone());
        if !self.inputs.is_empty() {
            flags.push(("inputs".into(), self.inputs.join(",")));
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            flags.push((k.trim().to_string(), v.trim().to_string()));
        }
        layers.push(flags);
        let mut cfg = RunConfig::resolve(&layers)?;
        if !self.inputs.is_empty() {
            // Keep paths containing commas intact.
            cfg.inputs = self.inputs.clone();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Ingest(c) => commands::ingest(&c.resolve()?),
        Command::Analyze(c) => commands::analyze(&c.resolve()?),
        Command::Buckets(c) => commands::buckets(&c.resolve()?),
        Command::ShuffleCheck(c) => commands::shuffle_check(&c.resolve()?),
        Command::Synth {
            common,
            kind,
            target_h,
            length,
            mix_weight,
        } => {
            let cfg = common.resolve()?;
            let kind: SynthKind = kind.parse()?;
            let spec = SynthSpec {
                kind,
                target_h,
                length,
                seed: cfg.seed,
                mix_weight,
            };
            commands::synth(&cfg, &spec)
        }
    }
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.is::<UsageError>() || e.is::<ConfigError>() || e.is::<SynthError>()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    match run(cli) {
        Ok(outcome) if outcome.total_failure() => {
            log::error!("all {} input files failed", outcome.failed);
            ExitCode::from(1)
        }
        Ok(outcome) => {
            if outcome.failed > 0 {
                log::warn!("{} of {} input files failed", outcome.failed, outcome.ok + outcome.failed);
            }
            ExitCode::SUCCESS
        }
        Err(e) if is_usage(&e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
