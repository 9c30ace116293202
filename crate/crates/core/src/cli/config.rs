use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::MleOptions;
use crate::model::{EfficiencyBudget, SourceParams, THETA_HAT_PERIOD};

pub const DEFAULT_CHUNK_SIZE: u64 = 1 << 18;

/// Shipped presets, by name.
pub const PRESETS: [(&str, &str); 3] = [
    ("paper-240m", include_str!("../../presets/paper-240m.json")),
    ("paper-10km", include_str!("../../presets/paper-10km.json")),
    ("ideal", include_str!("../../presets/ideal.json")),
];

fn default_chunk() -> u64 {
    DEFAULT_CHUNK_SIZE
}

fn default_block_points() -> usize {
    13
}

fn default_threshold_theta() -> f64 {
    PI / 6.0
}

/// Calibration fringe scan over one period of the global phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub points: usize,
    pub pulses_per_point: u64,
    #[serde(default = "default_chunk")]
    pub chunk_size: u64,
    /// Use the closed-form coincidence probabilities instead of sampling.
    #[serde(default)]
    pub analytic: bool,
}

impl ScanConfig {
    /// `theta_i = i P / points` covering `[0, P)` with `P = 2 pi / 3`.
    pub fn setpoints(&self) -> Vec<f64> {
        (0..self.points)
            .map(|i| i as f64 * THETA_HAT_PERIOD / self.points as f64)
            .collect()
    }
}

/// Block protocol for the precision runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    /// Informative events per block.
    pub k_bar: u64,
    /// Blocks per setpoint.
    pub s: usize,
    /// Number of evenly spaced setpoints inside the branch `(0, pi/3)`.
    #[serde(default = "default_block_points")]
    pub points: usize,
    /// Explicit setpoints; overrides `points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setpoints: Option<Vec<f64>>,
}

impl BlockConfig {
    pub fn setpoints(&self) -> Vec<f64> {
        match &self.setpoints {
            Some(v) => v.clone(),
            None => (0..self.points)
                .map(|j| (j as f64 + 0.5) * (PI / 3.0) / self.points as f64)
                .collect(),
        }
    }
}

/// Uniform-efficiency sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub eta_min: f64,
    pub eta_max: f64,
    pub step: f64,
    pub pulses_per_point: u64,
    #[serde(default = "default_threshold_theta")]
    pub theta_hat: f64,
    #[serde(default = "default_chunk")]
    pub chunk_size: u64,
}

impl ThresholdConfig {
    pub fn etas(&self) -> Vec<f64> {
        let n = ((self.eta_max - self.eta_min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.eta_min + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPhaseConfig {
    pub num_phases: usize,
    pub k_bar: u64,
    pub s: usize,
}

/// One JSON run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source: SourceParams,
    pub efficiency: EfficiencyBudget,
    pub scan: ScanConfig,
    pub blocks: BlockConfig,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_phase: Option<RandomPhaseConfig>,
    #[serde(default)]
    pub mle: MleOptions,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{key}`: {msg}"))
}

impl RunConfig {
    /// Parse and validate. Errors name the offending key and its position.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        // serde_json's message already ends with "at line L column C"
        let cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("`{}`: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            Error::Config(format!(
                "unknown preset `{name}`, expected one of {}",
                names.join(", ")
            ))
        })?;
        RunConfig::from_json_str(text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scan.points < 1 {
            return Err(bad("scan.points", "must be >= 1"));
        }
        if self.scan.pulses_per_point < 1 {
            return Err(bad("scan.pulses_per_point", "must be >= 1"));
        }
        if self.scan.chunk_size < 1 {
            return Err(bad("scan.chunk_size", "must be >= 1"));
        }
        if self.blocks.k_bar < 1 {
            return Err(bad("blocks.k_bar", "must be >= 1"));
        }
        if self.blocks.s < 2 {
            return Err(bad("blocks.s", "must be >= 2"));
        }
        if self.blocks.setpoints.is_none() && self.blocks.points < 1 {
            return Err(bad("blocks.points", "must be >= 1"));
        }
        if let Some(sp) = &self.blocks.setpoints {
            if sp.is_empty() || sp.iter().any(|t| !t.is_finite()) {
                return Err(bad("blocks.setpoints", "must be a non-empty list of finite phases"));
            }
        }
        if let Some(t) = &self.threshold {
            let in_range = |x: f64| x > 0.0 && x <= 1.0;
            if !in_range(t.eta_min) {
                return Err(bad("threshold.eta_min", "must lie in (0, 1]"));
            }
            if !in_range(t.eta_max) || t.eta_max < t.eta_min {
                return Err(bad("threshold.eta_max", "must lie in [eta_min, 1]"));
            }
            if !(t.step > 0.0) {
                return Err(bad("threshold.step", "must be > 0"));
            }
            if t.pulses_per_point < 1 {
                return Err(bad("threshold.pulses_per_point", "must be >= 1"));
            }
            if t.chunk_size < 1 {
                return Err(bad("threshold.chunk_size", "must be >= 1"));
            }
        }
        if let Some(r) = &self.random_phase {
            if r.k_bar < 1 {
                return Err(bad("random_phase.k_bar", "must be >= 1"));
            }
            if r.s < 2 {
                return Err(bad("random_phase.s", "must be >= 2"));
            }
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
