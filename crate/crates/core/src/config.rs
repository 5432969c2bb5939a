//! Run configuration: one JSON document describing the subject, features,
//! decoder, task geometry, training plan and benchmark size.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::elm::ElmModel;
use crate::engine::{EncoderParams, Engine, ModeKind, ModelParams, SessionConfig, TrainingPlan};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::task::TrialConfig;

/// Session indices used by benchmark runs; training uses `0..=passive_sessions`.
pub const HAND_BENCHMARK_INDEX: u64 = 100;
pub const NEURAL_BENCHMARK_INDEX: u64 = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkPlan {
    /// Trials per control mode.
    pub trials: u32,
    /// Ground-truth match fraction used for the chance level.
    pub match_fraction: f64,
    /// Use Welch's t-test instead of the pooled-variance test.
    pub welch: bool,
}

impl Default for BenchmarkPlan {
    fn default() -> Self {
        Self {
            trials: 60,
            match_fraction: 0.7,
            welch: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub encoder: EncoderParams,
    pub features: FeatureConfig,
    pub model: ModelParams,
    pub task: TrialConfig,
    pub inter_trial_ticks: u32,
    pub training: TrainingPlan,
    pub benchmark: BenchmarkPlan,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = Engine::default();
        Self {
            seed: e.seed,
            encoder: e.encoder,
            features: e.features,
            model: e.model,
            task: e.task,
            inter_trial_ticks: e.inter_trial_ticks,
            training: TrainingPlan::default(),
            benchmark: BenchmarkPlan::default(),
        }
    }
}

/// A configuration problem with the 1-based source line when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub error: Error,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Line of the first occurrence of the last path segment as a JSON key.
fn locate(text: &str, field: &str) -> Option<usize> {
    let key = field.rsplit('.').next()?;
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl RunConfig {
    pub fn engine(&self) -> Engine {
        Engine {
            seed: self.seed,
            encoder: self.encoder.clone(),
            features: self.features.clone(),
            model: self.model.clone(),
            task: self.task.clone(),
            inter_trial_ticks: self.inter_trial_ticks,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.engine().validate().map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::Config {
                field: "config".into(),
                msg: other.to_string(),
            },
        })?;
        let t = &self.training;
        if t.trials_per_session == 0 {
            return Err(Error::Config {
                field: "training.trials_per_session".into(),
                msg: "must be >= 1".into(),
            });
        }
        if !(0.0..=1.0).contains(&t.assist_p) {
            return Err(Error::Config {
                field: "training.assist_p".into(),
                msg: "must lie in [0, 1]".into(),
            });
        }
        if t.passive_sessions == 0 {
            return Err(Error::Config {
                field: "training.passive_sessions".into(),
                msg: "at least one passive session is needed to train the intermediate decoder".into(),
            });
        }
        if self.benchmark.trials == 0 {
            return Err(Error::Config {
                field: "benchmark.trials".into(),
                msg: "must be >= 1".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.benchmark.match_fraction) {
            return Err(Error::Config {
                field: "benchmark.match_fraction".into(),
                msg: "must lie in [0, 1]".into(),
            });
        }
        Ok(())
    }

    /// Parses and validates, reporting the offending line.
    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            line: Some(e.line()),
            error: Error::Parse(e.to_string()),
        })?;
        cfg.validate().map_err(|e| {
            let line = match &e {
                Error::Config { field, .. } => locate(text, field),
                _ => None,
            };
            ConfigError { line, error: e }
        })?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks that a stored decoder fits this configuration.
    pub fn check_model(&self, model: &ElmModel) -> Result<()> {
        if model.inputs() != self.features.channels {
            return Err(Error::Config {
                field: "features.channels".into(),
                msg: format!(
                    "model expects D = {} but the configuration has D = {}",
                    model.inputs(),
                    self.features.channels
                ),
            });
        }
        Ok(())
    }
}

/// Per-session reproduction record written next to each trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub seed: u64,
    pub mode: ModeKind,
    pub trials: u32,
    pub p: f64,
    pub index: u64,
    pub decoder_model_path: Option<String>,
    pub encoder_params: EncoderParams,
    pub feature_params: FeatureConfig,
    pub trial_log_path: String,
}

impl SessionManifest {
    pub fn new(cfg: &RunConfig, session: &SessionConfig, model_path: Option<&Path>, log_path: &Path) -> Self {
        Self {
            seed: cfg.seed,
            mode: session.mode,
            trials: session.trials,
            p: session.p,
            index: session.index,
            decoder_model_path: model_path.map(|p| p.display().to_string()),
            encoder_params: cfg.encoder.clone(),
            feature_params: cfg.features.clone(),
            trial_log_path: log_path.display().to_string(),
        }
    }
}

/// Top-level manifest of a CLI run: the full configuration plus what was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub sessions: Vec<SessionManifest>,
    pub models: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let text = c.to_json();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn empty_object_is_default() {
        assert_eq!(RunConfig::parse("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = RunConfig::parse("{\n  \"seed\": 1,\n  \"task\": {\n    \"d_f\": ,\n  }\n}").unwrap_err();
        assert_eq!(err.line, Some(4));
    }

    #[test]
    fn unknown_field_rejected() {
        let err = RunConfig::parse("{\n \"seed\": 1,\n \"encoder\": {\"chanels\": 3}\n}").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.to_string().contains("chanels"));
    }

    #[test]
    fn channel_mismatch_reports_field_line() {
        let text = "{\n  \"encoder\": {\"channels\": 64},\n  \"features\": {\n    \"channels\": 32,\n    \"t_w\": 0.5,\n    \"d_f\": 10.0\n  }\n}";
        let err = RunConfig::parse(text).unwrap_err();
        assert!(matches!(err.error, Error::Config { ref field, .. } if field == "features.channels"));
        // first line mentioning "channels"
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn bad_assist_rejected() {
        let err = RunConfig::parse("{\"training\": {\"assist_p\": 1.5}}").unwrap_err();
        assert!(err.to_string().contains("assist_p"));
    }
}
