//! Pipeline configuration: a JSON document plus command-line overrides.
//! Flags win over the environment, which wins over the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

pub const DATA_ROOT_ENV: &str = "ALERTCHAIN_DATA_ROOT";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_root")]
    pub root: PathBuf,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    #[serde(default)]
    pub signatures: Option<PathBuf>,
    #[serde(default)]
    pub dialect_manifest: Option<PathBuf>,
    #[serde(default)]
    pub stage_mapping: Option<PathBuf>,
    #[serde(default)]
    pub ip_map: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_score_threshold")]
    pub score_threshold: f64,
    #[serde(default = "default_interval_time")]
    pub interval_time: f64,
    #[serde(default = "default_group_threshold")]
    pub group_threshold: f64,
    #[serde(default = "default_alert_threshold")]
    pub alert_threshold: f64,
    #[serde(default = "default_dedupe_window")]
    pub dedupe_window: f64,
    #[serde(default = "default_episode_gap")]
    pub episode_gap: f64,
    #[serde(default = "default_test_window_duration")]
    pub test_window_duration: f64,
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn default_root() -> PathBuf {
    PathBuf::from("data")
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_score_threshold() -> f64 {
    0.7
}
fn default_interval_time() -> f64 {
    2.0
}
fn default_group_threshold() -> f64 {
    0.55
}
fn default_alert_threshold() -> f64 {
    0.5
}
fn default_dedupe_window() -> f64 {
    2.0
}
fn default_episode_gap() -> f64 {
    7_200.0
}
fn default_test_window_duration() -> f64 {
    18_000.0
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// Command-line overrides collected by clap; every field mirrors a config
/// key.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Input root containing `<scenario>/<ids>/<host>` alert files
    #[arg(long, global = true)]
    pub root: Option<PathBuf>,
    /// Scenario label file (JSON)
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
    /// Signature table file (default: bundled taxonomy)
    #[arg(long, global = true)]
    pub signatures: Option<PathBuf>,
    /// Dialect field-extraction manifest (default: bundled)
    #[arg(long, global = true)]
    pub dialect_manifest: Option<PathBuf>,
    /// Stage mapping file (default: bundled mapping)
    #[arg(long, global = true)]
    pub stage_mapping: Option<PathBuf>,
    /// Per-scenario victim address map (JSON)
    #[arg(long, global = true)]
    pub ip_map: Option<PathBuf>,
    /// Output directory for all artifacts
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Detection-score cutoff (alerts kept strictly above it)
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Gap that closes an alert group, in seconds
    #[arg(long, global = true)]
    pub interval_time: Option<f64>,
    /// Minimum similarity for merging a group into a meta-alert
    #[arg(long, global = true)]
    pub group_threshold: Option<f64>,
    /// Minimum similarity for pairing an alert with a template
    #[arg(long, global = true)]
    pub alert_threshold: Option<f64>,
    /// Repetition-filter window, in seconds
    #[arg(long, global = true)]
    pub dedupe_window: Option<f64>,
    /// Gap that closes an episode, in seconds
    #[arg(long, global = true)]
    pub episode_gap: Option<f64>,
    /// Derived test-window length, in seconds
    #[arg(long, global = true)]
    pub test_window_duration: Option<f64>,
    /// Worker threads for the parallel stages
    #[arg(long, short = 'j', global = true)]
    pub jobs: Option<usize>,
}

pub fn load(config_path: Option<&Path>, overrides: &Overrides) -> Result<PipelineConfig, CliError> {
    let mut config = match config_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Ok(root) = std::env::var(DATA_ROOT_ENV) {
        if !root.is_empty() {
            config.root = PathBuf::from(root);
        }
    }
    let o = overrides.clone();
    if let Some(v) = o.root {
        config.root = v;
    }
    if let Some(v) = o.labels {
        config.labels = Some(v);
    }
    if let Some(v) = o.signatures {
        config.signatures = Some(v);
    }
    if let Some(v) = o.dialect_manifest {
        config.dialect_manifest = Some(v);
    }
    if let Some(v) = o.stage_mapping {
        config.stage_mapping = Some(v);
    }
    if let Some(v) = o.ip_map {
        config.ip_map = Some(v);
    }
    if let Some(v) = o.out {
        config.out = v;
    }
    if let Some(v) = o.threshold {
        config.score_threshold = v;
    }
    if let Some(v) = o.interval_time {
        config.interval_time = v;
    }
    if let Some(v) = o.group_threshold {
        config.group_threshold = v;
    }
    if let Some(v) = o.alert_threshold {
        config.alert_threshold = v;
    }
    if let Some(v) = o.dedupe_window {
        config.dedupe_window = v;
    }
    if let Some(v) = o.episode_gap {
        config.episode_gap = v;
    }
    if let Some(v) = o.test_window_duration {
        config.test_window_duration = v;
    }
    if let Some(v) = o.jobs {
        config.jobs = Some(v);
    }
    validate(&config)?;
    Ok(config)
}

fn validate(config: &PipelineConfig) -> Result<(), CliError> {
    for (name, value) in [
        ("score_threshold", config.score_threshold),
        ("group_threshold", config.group_threshold),
        ("alert_threshold", config.alert_threshold),
    ] {
        if !(0.0..=1.0).contains(&value) {
            return Err(CliError::config(format!("{name} must lie in [0, 1], got {value}")));
        }
    }
    for (name, value) in [
        ("interval_time", config.interval_time),
        ("dedupe_window", config.dedupe_window),
        ("episode_gap", config.episode_gap),
        ("test_window_duration", config.test_window_duration),
    ] {
        if value.is_nan() || value <= 0.0 || !value.is_finite() {
            return Err(CliError::config(format!("{name} must be positive, got {value}")));
        }
    }
    for (name, path) in [
        ("labels", &config.labels),
        ("signatures", &config.signatures),
        ("dialect_manifest", &config.dialect_manifest),
        ("stage_mapping", &config.stage_mapping),
        ("ip_map", &config.ip_map),
    ] {
        if let Some(path) = path {
            if !path.exists() {
                return Err(CliError::config(format!(
                    "{name} file {} does not exist",
                    path.display()
                )));
            }
        }
    }
    Ok(())
}
