use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use teleport_core::classical::{self, Ensemble};
use teleport_core::counts::NoiseModel;
use teleport_core::PrepSpec;

use crate::error::CliError;

/// Analyzer angles `start, start + step, …, stop`, degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerGrid {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

impl Default for AnalyzerGrid {
    fn default() -> Self {
        Self {
            start_deg: -90.0,
            stop_deg: 90.0,
            step_deg: 2.0,
        }
    }
}

fn default_pairs() -> u64 {
    4000
}

fn default_outcomes() -> usize {
    2
}

fn default_restarts() -> usize {
    classical::DEFAULT_RESTARTS
}

fn default_resolution() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeleportConfig {
    pub preparation: PrepSpec,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default = "default_pairs")]
    pub pairs_per_point: u64,
    #[serde(default)]
    pub analyzer_grid: AnalyzerGrid,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl Default for TeleportConfig {
    fn default() -> Self {
        Self {
            preparation: PrepSpec::linear(22.5),
            noise: NoiseModel::ideal(),
            pairs_per_point: default_pairs(),
            analyzer_grid: AnalyzerGrid::default(),
            seed: None,
            out_dir: None,
        }
    }
}

/// Ensemble states given as preparations; uniform when `probs` is absent.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub states: Vec<PrepSpec>,
    #[serde(default)]
    pub probs: Option<Vec<f64>>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            states: [0.0, 120.0, -120.0].map(PrepSpec::linear).to_vec(),
            probs: None,
        }
    }
}

impl EnsembleConfig {
    pub fn build(&self) -> Result<Ensemble, CliError> {
        for s in &self.states {
            s.validate()?;
        }
        let states = self.states.iter().map(PrepSpec::prepared_state).collect();
        Ok(match &self.probs {
            Some(p) => Ensemble::new(states, p.clone())?,
            None => Ensemble::uniform(states)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default = "default_outcomes")]
    pub outcomes: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            ensemble: EnsembleConfig::default(),
            outcomes: default_outcomes(),
            restarts: default_restarts(),
            resolution: default_resolution(),
            seed: None,
            out_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySConfig {
    pub noise: NoiseModel,
    #[serde(default = "default_pairs")]
    pub pairs_per_setting: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl Default for VerifySConfig {
    fn default() -> Self {
        Self {
            noise: NoiseModel::with_visibility(0.662),
            pairs_per_setting: default_pairs(),
            seed: None,
            out_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub preparation: PrepSpec,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            preparation: PrepSpec::linear(22.5),
            out_dir: None,
        }
    }
}

/// Reads a JSON config, or the defaults when no path is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse(&text, &path.display().to_string())
}

pub fn parse<T: DeserializeOwned>(text: &str, source: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| {
        let mut message = e.to_string();
        if let Some(i) = message.rfind(" at line ") {
            message.truncate(i);
        }
        CliError::Config {
            location: format!("{source}:{}:{}", e.line(), e.column()),
            message,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_teleport_config() {
        let c: TeleportConfig = parse(r#"{"preparation": {"theta_deg": 22.5}}"#, "t").unwrap();
        assert_eq!(c.preparation, PrepSpec::linear(22.5));
        assert_eq!(c.noise, NoiseModel::ideal());
        assert_eq!(c.analyzer_grid, AnalyzerGrid::default());
        assert_eq!(c.pairs_per_point, 4000);
    }

    #[test]
    fn unknown_field_reports_position() {
        let text = "{\n  \"preparation\": {\"theta_deg\": 0},\n  \"colour\": 1\n}";
        let err = parse::<TeleportConfig>(text, "cfg.json").unwrap_err();
        let CliError::Config { location, message } = err else {
            panic!("wrong error kind");
        };
        assert_eq!(location, "cfg.json:3:10");
        assert!(message.contains("colour"), "{message}");
        assert!(!message.contains("at line"));
    }

    #[test]
    fn nested_unknown_field_rejected() {
        let text = r#"{"noise": {"visibility": 0.5, "alice_efficiency": 1, "bob_efficiency": 1, "gain": 2}}"#;
        assert!(parse::<VerifySConfig>(text, "v").is_err());
    }

    #[test]
    fn ensemble_defaults_to_trine() {
        let e = EnsembleConfig::default().build().unwrap();
        let trine = Ensemble::trine();
        for (a, b) in e.states().iter().zip(trine.states()) {
            assert!((a.alpha() - b.alpha()).norm() < 1e-12 && (a.beta() - b.beta()).norm() < 1e-12);
        }
    }

    #[test]
    fn ensemble_probabilities_checked() {
        let c: BoundConfig = parse(
            r#"{"ensemble": {"states": [{"theta_deg": 0}, {"theta_deg": 90}], "probs": [0.5, 0.6]}}"#,
            "b",
        )
        .unwrap();
        assert!(c.ensemble.build().is_err());
    }
}
