//! Application configuration: one JSON document, every section optional.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::denoiser::TrainConfig;
use crate::diffusion::ScheduleConfig;
use crate::error::{field_path, Error, Result};
use crate::metrics::FeedbackConfig;
use crate::rules::RuleConfig;

/// Environment variable consulted when no `--config` flag is given.
pub const CONFIG_ENV: &str = "LAYOUTFORGE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    /// Projection period `k` during sampling; 0 disables the design-rule projection.
    pub projection_every: usize,
    /// Re-noising depth for refine requests; `None` means `T / 2`.
    pub refine_t_start: Option<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            projection_every: 25,
            refine_t_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Size of the synthetic corpus used when no corpus file is configured.
    pub synth_n: usize,
    /// Fraction of items in the training split.
    pub split_ratio: f64,
    /// Screen size RICO bounds are normalized by.
    pub screen_px: (f64, f64),
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            synth_n: 2000,
            split_ratio: 0.9,
            screen_px: (1440.0, 2560.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    /// RICO label table; the built-in table is used when absent.
    pub label_map: Option<PathBuf>,
    /// Built studio assets served at `/` when set.
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

/// Seeds not owned by a more specific section (training has `train.seed`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SeedConfig {
    pub synth: u64,
    pub split: u64,
    pub sample: u64,
    pub eval: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub schedule: ScheduleConfig,
    pub train: TrainConfig,
    pub rules: RuleConfig,
    pub sampling: SamplingConfig,
    pub feedback: FeedbackConfig,
    pub data: DataConfig,
    pub paths: PathsConfig,
    pub server: ServerConfig,
    pub seeds: SeedConfig,
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl AppConfig {
    /// Parses and validates a config document. Errors carry the dotted key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let message = e.inner().to_string();
            config_error(field_path(&e.path().to_string(), &message), message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Loads `explicit` if given, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        if let Some(path) = explicit {
            return Self::load(path);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(path) if !path.is_empty() => Self::load(PathBuf::from(path)),
            _ => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule
            .build()
            .map_err(|e| config_error("schedule", e.to_string()))?;
        self.train.validate()?;
        self.rules.validate()?;
        if let Some(t) = self.sampling.refine_t_start {
            if t == 0 || t > self.schedule.timesteps {
                return Err(config_error(
                    "sampling.refine_t_start",
                    format!("must be in 1..={}", self.schedule.timesteps),
                ));
            }
        }
        let fb = &self.feedback;
        if !(fb.pin_fraction > 0.0 && fb.pin_fraction <= 1.0) {
            return Err(config_error("feedback.pin_fraction", "must be in (0, 1]"));
        }
        if !(fb.t_start_fraction > 0.0 && fb.t_start_fraction <= 1.0) {
            return Err(config_error("feedback.t_start_fraction", "must be in (0, 1]"));
        }
        if self.data.synth_n == 0 {
            return Err(config_error("data.synth_n", "must be positive"));
        }
        if !(self.data.split_ratio > 0.0 && self.data.split_ratio < 1.0) {
            return Err(config_error("data.split_ratio", "must be in (0, 1)"));
        }
        let (w, h) = self.data.screen_px;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(config_error("data.screen_px", "must be positive"));
        }
        Ok(())
    }

    /// Refine depth: the configured value or `T / 2`.
    pub fn refine_t_start(&self) -> usize {
        self.sampling
            .refine_t_start
            .unwrap_or((self.schedule.timesteps / 2).max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(AppConfig::from_json("{}").unwrap(), AppConfig::default());
        assert_eq!(AppConfig::default().refine_t_start(), 100);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = AppConfig::from_json(r#"{"train": {"epochs": 3}, "server": {"port": 9000}}"#).unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.batch_size, 64);
        assert_eq!(cfg.server.port, 9000);
        assert_eq!(cfg.server.host, "127.0.0.1");
    }

    fn config_path(text: &str) -> String {
        match AppConfig::from_json(text).unwrap_err() {
            Error::Config { path, .. } => path,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unknown_keys_name_their_path() {
        assert_eq!(config_path(r#"{"train": {"epochz": 3}}"#), "train.epochz");
        assert_eq!(config_path(r#"{"bogus": 1}"#), "bogus");
        assert_eq!(config_path(r#"{"rules": {"tau_snap": "x"}}"#), "rules.tau_snap");
    }

    #[test]
    fn semantic_validation() {
        assert_eq!(config_path(r#"{"train": {"learning_rate": -1}}"#), "train.learning_rate");
        assert_eq!(config_path(r#"{"rules": {"tau_align": 0.5}}"#), "rules.tau_align");
        assert_eq!(config_path(r#"{"sampling": {"refine_t_start": 500}}"#), "sampling.refine_t_start");
        assert_eq!(config_path(r#"{"schedule": {"beta_end": 2.0}}"#), "schedule");
        assert_eq!(config_path(r#"{"data": {"split_ratio": 1.0}}"#), "data.split_ratio");
    }
}
