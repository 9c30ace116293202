//! Command-line runner.
//!
//! Every subcommand resolves one [`RunConfig`] (from `--config`, `--preset`
//! or a previous run's `--manifest`), applies `--seed` and `--trials`,
//! writes its outputs into `--out` and finishes with `manifest.json`.
//! Passing that manifest back with `--manifest` replays the run; all output
//! files except the manifest's timestamp come out byte-identical.
//!
//! `--trials` overrides the trials per setting: pulses per point for
//! `fringe` and `threshold-scan`, informative events per block (`k_bar`)
//! for `precision`, `random-phase` and `audit`.

mod commands;
mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use commands::{
    calibrate, cmd_audit, cmd_fringe, cmd_precision, cmd_random_phase, cmd_threshold_scan,
    locate_crossing, run_audit, run_precision, run_random_phase, run_threshold_scan, AuditRun,
    FringeRun, PrecisionRun, RandomPhaseRun, SettingAudit, ThresholdPoint, ThresholdRun,
};
pub use config::{
    BlockConfig, RandomPhaseConfig, RunConfig, ScanConfig, ThresholdConfig, DEFAULT_CHUNK_SIZE,
    PRESETS,
};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "dqsense", version, about = "Entangled two-node phase sensing: simulation and estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, conflicts_with_all = ["preset", "manifest"])]
    pub config: Option<PathBuf>,
    /// Shipped preset: paper-240m, paper-10km or ideal.
    #[arg(long, conflicts_with = "manifest")]
    pub preset: Option<String>,
    /// Replay the run recorded in a manifest.json.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Trials per setting override.
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Calibration fringe scan and joint fit.
    Fringe {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write the per-pulse event log `events.csv`.
        #[arg(long)]
        log_events: bool,
    },
    /// Block-statistics precision against SNL and HL per setpoint.
    Precision {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Uniform-efficiency sweep locating the SNL threshold.
    ThresholdScan {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Random unknown-phase estimation table.
    RandomPhase {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Recompute tallies, resources and precision from an event log.
    Audit {
        #[command(flatten)]
        common: CommonArgs,
        /// Event log CSV (`pulse_index,setting_index,pattern,truth_pairs`).
        #[arg(long)]
        events: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fringe { .. } => "fringe",
            Command::Precision { .. } => "precision",
            Command::ThresholdScan { .. } => "threshold-scan",
            Command::RandomPhase { .. } => "random-phase",
            Command::Audit { .. } => "audit",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Fringe { common, .. }
            | Command::Precision { common }
            | Command::ThresholdScan { common }
            | Command::RandomPhase { common }
            | Command::Audit { common, .. } => common,
        }
    }
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<PathBuf>,
    pub preset: Option<String>,
    pub events_path: Option<PathBuf>,
    pub log_events: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
    pub tool_version: String,
    pub timestamp: String,
    pub outputs: Vec<String>,
    /// Resolved configuration with all overrides applied.
    pub config: RunConfig,
}

impl RunManifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let m: RunManifest = serde_path_to_error::deserialize(de).map_err(|e| {
            Error::Config(format!("{}: `{}`: {}", path.display(), e.path(), e.inner()))
        })?;
        m.config.validate()?;
        Ok(m)
    }
}

fn apply_trials(cmd: &str, cfg: &mut RunConfig, trials: u64) -> Result<()> {
    if trials < 1 {
        return Err(Error::Config("--trials must be >= 1".into()));
    }
    match cmd {
        "fringe" => cfg.scan.pulses_per_point = trials,
        "threshold-scan" => {
            cfg.threshold
                .as_mut()
                .ok_or_else(|| Error::Config("missing `threshold` section".into()))?
                .pulses_per_point = trials
        }
        "random-phase" => {
            cfg.random_phase
                .as_mut()
                .ok_or_else(|| Error::Config("missing `random_phase` section".into()))?
                .k_bar = trials
        }
        _ => cfg.blocks.k_bar = trials,
    }
    Ok(())
}

/// Resolved invocation: configuration plus provenance for the manifest.
struct Resolved {
    config: RunConfig,
    config_path: Option<PathBuf>,
    preset: Option<String>,
    events: Option<PathBuf>,
    log_events: bool,
}

fn resolve(command: &Command) -> Result<Resolved> {
    let common = command.common();
    let (events_arg, log_arg) = match command {
        Command::Audit { events, .. } => (events.clone(), false),
        Command::Fringe { log_events, .. } => (None, *log_events),
        _ => (None, false),
    };
    let mut r = if let Some(path) = &common.manifest {
        let m = RunManifest::from_path(path)?;
        if m.subcommand != command.name() {
            return Err(Error::Config(format!(
                "manifest records `{}`, not `{}`",
                m.subcommand,
                command.name()
            )));
        }
        Resolved {
            config: m.config,
            config_path: m.config_path,
            preset: m.preset,
            events: events_arg.or(m.events_path),
            log_events: log_arg || m.log_events,
        }
    } else {
        let (config, config_path, preset) = match (&common.config, &common.preset) {
            (Some(p), None) => (RunConfig::from_path(p)?, Some(p.clone()), None),
            (None, Some(name)) => (RunConfig::preset(name)?, None, Some(name.clone())),
            _ => {
                return Err(Error::Config(
                    "exactly one of --config, --preset or --manifest is required".into(),
                ))
            }
        };
        Resolved {
            config,
            config_path,
            preset,
            events: events_arg,
            log_events: log_arg,
        }
    };
    if let Some(seed) = common.seed {
        r.config.seed = seed;
    }
    if let Some(t) = common.trials {
        apply_trials(command.name(), &mut r.config, t)?;
    }
    r.config.validate()?;
    Ok(r)
}

/// Run one command and write its manifest. Returns the manifest.
pub fn execute(command: &Command) -> Result<RunManifest> {
    let common = command.common();
    let resolved = resolve(command)?;
    let out = &common.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = common.workers {
        if w < 1 {
            return Err(Error::Config("--workers must be >= 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let cfg = &resolved.config;
    let outputs = pool.install(|| -> Result<Vec<String>> {
        Ok(match command {
            Command::Fringe { .. } => cmd_fringe(cfg, out, resolved.log_events)?.1,
            Command::Precision { .. } => cmd_precision(cfg, out)?.1,
            Command::ThresholdScan { .. } => cmd_threshold_scan(cfg, out)?.1,
            Command::RandomPhase { .. } => cmd_random_phase(cfg, out)?.1,
            Command::Audit { .. } => {
                let events = resolved
                    .events
                    .as_deref()
                    .ok_or_else(|| Error::Config("audit needs --events <path>".into()))?;
                cmd_audit(cfg, events, out)?.1
            }
        })
    })?;

    let manifest = RunManifest {
        subcommand: command.name().to_string(),
        config_path: resolved.config_path.clone(),
        preset: resolved.preset.clone(),
        events_path: resolved.events.clone(),
        log_events: resolved.log_events,
        seed: cfg.seed,
        out_dir: out.clone(),
        workers: common.workers,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        outputs,
        config: cfg.clone(),
    };
    commands::write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
