//! Experiment configuration files (JSON, schema-versioned).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::FusionRule;
use crate::network::{MacModel, NetworkScenario, ScenarioGenerator};
use crate::rng::{stream_rng, SCENARIO_STREAM};
use crate::sim::{validate_events, MobilitySpec, ScenarioEvent};

pub const SCHEMA_VERSION: u32 = 1;

/// Where the network comes from. Random scenarios are redrawn per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSource {
    Random(ScenarioGenerator),
    Inline(NetworkScenario),
    /// Path to a scenario JSON document, relative to the config file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitFlags {
    #[serde(default = "yes")]
    pub metrics_csv: bool,
    #[serde(default = "yes")]
    pub summary_json: bool,
    #[serde(default = "yes")]
    pub formation_traces: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self {
            metrics_csv: true,
            summary_json: true,
            formation_traces: true,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variable", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum SweepSpec {
    /// Coalition FA of a two-member coalition as its SNRs split around a
    /// fixed mean, under both fusion rules.
    SnrSplit {
        mean_snr: f64,
        points: usize,
        coalition_md: f64,
        num_samples: u32,
    },
    /// Formation cost as the number of channels varies.
    NumChannels { values: Vec<usize> },
    /// Switch frequency under mobility, per speed and optionally per
    /// channel count.
    Speed {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        channels: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub scenario: ScenarioSource,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<ScenarioEvent>,
    #[serde(default)]
    pub mobility: MobilitySpec,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    /// Overrides the scenario's fusion rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion_rule: Option<FusionRule>,
    /// Overrides the scenario's MAC model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac_model: Option<MacModel>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub emit: EmitFlags,
    /// Slots aggregated into one CSV row.
    #[serde(default = "default_window")]
    pub window_slots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_window() -> usize {
    1
}

/// A configuration problem, anchored to a line of the source when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: Option<PathBuf>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            source: None,
            line: None,
            column: None,
            message: message.into(),
        }
    }

    fn at_key(text: &str, key: &str, message: impl Into<String>) -> Self {
        let mut err = Self::new(message);
        if let Some((line, column)) = locate_key(text, key) {
            err.line = Some(line);
            err.column = Some(column);
        }
        err
    }

    pub fn with_source(mut self, path: &Path) -> Self {
        self.source = Some(path.to_path_buf());
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let source = self
            .source
            .as_ref()
            .map_or_else(|| "<config>".to_string(), |p| p.display().to_string());
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{source}:{l}:{c}: {}", self.message),
            (Some(l), None) => write!(f, "{source}:{l}: {}", self.message),
            _ if self.source.is_none() => f.write_str(&self.message),
            _ => write!(f, "{source}: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// serde_json appends " at line L column C", which the error already carries.
fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(at) => message[..at].to_string(),
        None => message.to_string(),
    }
}

/// 1-based line and column of the first `"key":` in `text`.
fn locate_key(text: &str, key: &str) -> Option<(usize, usize)> {
    let needle = format!("\"{key}\"");
    for (i, line) in text.lines().enumerate() {
        let mut from = 0;
        while let Some(pos) = line[from..].find(&needle) {
            let at = from + pos;
            if line[at + needle.len()..].trim_start().starts_with(':') {
                return Some((i + 1, at + 1));
            }
            from = at + needle.len();
        }
    }
    None
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text).map_err(|e| ConfigError {
            source: None,
            line: Some(e.line()),
            column: Some(e.column()),
            message: strip_position(&e.to_string()),
        })?;
        config.validate_against(text)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read config: {e}")).with_source(path))?;
        Self::from_json_str(&text).map_err(|e| e.with_source(path))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_against(&self.to_json_string())
    }

    fn validate_against(&self, text: &str) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::at_key(
                text,
                "schema_version",
                format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::at_key(text, "seeds", "at least one seed is required"));
        }
        if self.horizon == 0 {
            return Err(ConfigError::at_key(text, "horizon", "horizon must be at least one slot"));
        }
        if self.window_slots == 0 {
            return Err(ConfigError::at_key(text, "window_slots", "window_slots must be at least 1"));
        }
        validate_events(&self.events).map_err(|e| ConfigError::at_key(text, "events", e.to_string()))?;
        if let Some(bad) = self.events.iter().find(|e| e.slot >= self.horizon) {
            return Err(ConfigError::at_key(
                text,
                "events",
                format!("event at slot {} lies beyond the horizon {}", bad.slot, self.horizon),
            ));
        }
        self.mobility
            .validate()
            .map_err(|e| ConfigError::at_key(text, "mobility", e.to_string()))?;
        match &self.scenario {
            ScenarioSource::Random(g) => {
                if g.num_sus == 0 || g.num_channels == 0 {
                    return Err(ConfigError::at_key(text, "random", "need at least one SU and one channel"));
                }
                g.radio.validate().map_err(|e| ConfigError::at_key(text, "radio", e.to_string()))?;
            }
            ScenarioSource::Inline(s) => {
                s.validate().map_err(|e| ConfigError::at_key(text, "inline", e.to_string()))?;
            }
            ScenarioSource::File(_) => {}
        }
        if let Some(sweep) = &self.sweep {
            self.validate_sweep(sweep, text)?;
        }
        Ok(())
    }

    fn validate_sweep(&self, sweep: &SweepSpec, text: &str) -> Result<(), ConfigError> {
        let err = |msg: String| ConfigError::at_key(text, "sweep", msg);
        match sweep {
            SweepSpec::SnrSplit {
                mean_snr,
                points,
                coalition_md,
                num_samples,
            } => {
                if !(*mean_snr > 0.0 && mean_snr.is_finite()) {
                    return Err(err(format!("mean_snr must be positive, got {mean_snr}")));
                }
                if *points < 2 {
                    return Err(err("an SNR-split sweep needs at least 2 points".into()));
                }
                if !(*coalition_md > 0.0 && *coalition_md < 1.0) {
                    return Err(err(format!("coalition_md must be in (0, 1), got {coalition_md}")));
                }
                if *num_samples == 0 {
                    return Err(err("num_samples must be positive".into()));
                }
            }
            SweepSpec::NumChannels { values } => {
                if values.is_empty() || values.contains(&0) {
                    return Err(err("channel counts must be a nonempty list of positive integers".into()));
                }
                if !matches!(self.scenario, ScenarioSource::Random(_)) {
                    return Err(err("a NUM_CHANNELS sweep needs a random scenario".into()));
                }
            }
            SweepSpec::Speed { values, channels } => {
                if values.is_empty() || values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(err("speeds must be a nonempty list of nonnegative numbers".into()));
                }
                if channels.contains(&0) {
                    return Err(err("channel counts must be positive".into()));
                }
                if !channels.is_empty() && !matches!(self.scenario, ScenarioSource::Random(_)) {
                    return Err(err("sweeping channel counts needs a random scenario".into()));
                }
            }
        }
        Ok(())
    }

    /// The scenario for `seed`, with the config's rule overrides applied.
    /// `base_dir` resolves relative scenario files.
    pub fn scenario_for_seed(&self, seed: u64, base_dir: &Path) -> Result<NetworkScenario, ConfigError> {
        self.scenario_with_channels(seed, base_dir, None)
    }

    /// Like [`ExperimentConfig::scenario_for_seed`] with the channel count
    /// of a random scenario replaced.
    pub fn scenario_with_channels(
        &self,
        seed: u64,
        base_dir: &Path,
        channels: Option<usize>,
    ) -> Result<NetworkScenario, ConfigError> {
        let mut scenario = match &self.scenario {
            ScenarioSource::Random(g) => {
                let mut g = g.clone();
                if let Some(n) = channels {
                    g.num_channels = n;
                }
                g.generate(&mut stream_rng(seed, SCENARIO_STREAM))
                    .map_err(|e| ConfigError::new(format!("scenario generation failed: {e}")))?
            }
            ScenarioSource::Inline(s) => s.clone(),
            ScenarioSource::File(p) => {
                let path = base_dir.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ConfigError::new(format!("cannot read scenario file: {e}")).with_source(&path))?;
                let s: NetworkScenario = serde_json::from_str(&text)
                    .map_err(|e| ConfigError {
                        source: Some(path.clone()),
                        line: Some(e.line()),
                        column: Some(e.column()),
                        message: e.to_string(),
                    })?;
                s.validate()
                    .map_err(|e| ConfigError::new(e.to_string()).with_source(&path))?;
                s
            }
        };
        if let Some(rule) = self.fusion_rule {
            scenario.fusion_rule = rule;
        }
        if let Some(mac) = self.mac_model {
            scenario.mac_model = mac;
        }
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "schema_version": 1,
  "scenario": { "random": { "num_sus": 4, "num_channels": 2 } },
  "horizon": 50,
  "seeds": [1, 2]
}"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_json_str(MINIMAL).unwrap();
        assert_eq!(c.window_slots, 1);
        assert!(c.emit.metrics_csv && c.emit.summary_json && c.emit.formation_traces);
        assert_eq!(c.mobility, MobilitySpec::stationary());
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::from_json_str(MINIMAL).unwrap();
        let again = ExperimentConfig::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn empty_seeds_anchored() {
        let text = MINIMAL.replace("[1, 2]", "[]");
        let e = ExperimentConfig::from_json_str(&text).unwrap_err();
        assert_eq!(e.line, Some(5));
        assert!(e.message.contains("seed"));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let text = MINIMAL.replace("\"horizon\": 50,", "\"horizon\": 50");
        let e = ExperimentConfig::from_json_str(&text).unwrap_err();
        assert_eq!(e.line, Some(5));
    }

    #[test]
    fn unknown_sweep_variable_rejected() {
        let text = MINIMAL.replace("\"seeds\": [1, 2]", "\"seeds\": [1], \"sweep\": { \"variable\": \"WIDTH\" }");
        assert!(ExperimentConfig::from_json_str(&text).is_err());
    }

    #[test]
    fn key_location() {
        assert_eq!(locate_key("{\n  \"a\": 1,\n  \"b\" : 2 }", "b"), Some((3, 3)));
        assert_eq!(locate_key("{\"x\": \"b\"}", "b"), None);
    }
}
