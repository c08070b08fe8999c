//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scheme::SchemeId;
use crate::agent::TrainConfig;
use crate::ao::AoConfig;
use crate::env::Scenario;
use crate::error::{Error, Result};

/// File name of the resolved configuration written next to the outputs.
pub const CONFIG_ECHO: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    /// AO outer iteration caps; each is run for exactly that many iterations.
    pub ao_caps: Vec<usize>,
    /// Decisions timed per setting.
    pub decisions: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            ao_caps: vec![20, 40, 60],
            decisions: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// `tiny`, `default`, or a path to a scenario JSON file.
    pub scenario: String,
    pub schemes: Vec<SchemeId>,
    pub seeds: Vec<u64>,
    /// Training episodes, and the episode count of per-step AO runs.
    pub episodes: usize,
    pub steps: usize,
    /// Greedy evaluation episodes after training.
    pub eval_episodes: usize,
    /// Trailing episodes averaged by the comparison summary.
    pub final_window: usize,
    pub out_dir: PathBuf,
    /// Fill the `decision_ms` column. Rows then differ between reruns.
    pub record_timing: bool,
    /// Learner settings. Keys left out keep their [`TrainConfig::desk`]
    /// values; `episodes` and `steps_per_episode` are replaced by the fields
    /// above.
    #[serde(deserialize_with = "over_desk")]
    pub train: TrainConfig,
    pub ao: AoConfig,
    pub timing: TimingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "tiny".into(),
            schemes: vec![SchemeId::Proposed],
            seeds: vec![0],
            episodes: 300,
            steps: 10,
            eval_episodes: 20,
            final_window: 20,
            out_dir: PathBuf::from("runs"),
            record_timing: false,
            train: TrainConfig::desk(),
            ao: AoConfig::default(),
            timing: TimingConfig::default(),
        }
    }
}

fn over_desk<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<TrainConfig, D::Error> {
    use serde::de::Error as _;
    let patch = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
    let mut base = match serde_json::to_value(TrainConfig::desk()) {
        Ok(serde_json::Value::Object(m)) => m,
        _ => unreachable!("TrainConfig serializes to an object"),
    };
    base.extend(patch);
    serde_json::from_value(serde_json::Value::Object(base)).map_err(D::Error::custom)
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.final_window == 0 {
            return Err(Error::Config("final_window must be at least 1".into()));
        }
        if self.timing.decisions == 0 {
            return Err(Error::Config("timing.decisions must be at least 1".into()));
        }
        if self.timing.ao_caps.contains(&0) {
            return Err(Error::Config("timing.ao_caps entries must be at least 1".into()));
        }
        self.train_config().validate()?;
        self.ao.validate()
    }

    /// The learner settings with the run horizon applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            episodes: self.episodes,
            steps_per_episode: self.steps,
            eval_episodes: self.eval_episodes,
            ..self.train.clone()
        }
    }

    /// Resolves and validates the scenario. Every failure is reported as a
    /// configuration error.
    pub fn load_scenario(&self) -> Result<Scenario> {
        let s = match self.scenario.as_str() {
            "tiny" => Ok(Scenario::tiny()),
            "default" => Ok(Scenario::default_preset()),
            path => Scenario::load(path),
        };
        s.and_then(|s| s.validate().map(|_| s)).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("scenario `{}`: {m}", self.scenario)),
            other => Error::Config(format!("scenario `{}`: {other}", self.scenario)),
        })
    }

    /// Writes the fully resolved configuration, defaults included and the
    /// horizon copied into `train`, to `dir/config.json`.
    pub fn echo(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join(CONFIG_ECHO);
        let resolved = RunConfig {
            train: self.train_config(),
            ..self.clone()
        };
        fs::write(&path, resolved.to_json_pretty() + "\n")?;
        Ok(path)
    }
}

/// Reads and validates a configuration file. Parse errors carry the line
/// and column; unknown keys are named.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    RunConfig::from_json_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cfg = RunConfig {
            schemes: vec![SchemeId::Ao, SchemeId::FixedIrs],
            seeds: vec![4, 1],
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_json_str(&cfg.to_json_pretty()).unwrap(), cfg);
    }

    #[test]
    fn errors_are_located_and_named() {
        let e = RunConfig::from_json_str("{\n  \"seeds\": [1,\n}").unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        let e = RunConfig::from_json_str("{\"sedes\": [1]}").unwrap_err().to_string();
        assert!(e.contains("`sedes`"), "{e}");
        assert!(RunConfig::from_json_str("{\"seeds\": []}").is_err());
        assert!(RunConfig::from_json_str("{\"schemes\": [\"best\"]}").is_err());
        let e = RunConfig::from_json_str("{\"train\": {\"batch\": 3}}").unwrap_err().to_string();
        assert!(e.contains("`batch`"), "{e}");
    }

    #[test]
    fn partial_train_section_keeps_desk_values() {
        let cfg = RunConfig::from_json_str("{\"train\": {\"batch_size\": 16}}").unwrap();
        assert_eq!(
            cfg.train,
            TrainConfig {
                batch_size: 16,
                ..TrainConfig::desk()
            }
        );
    }
}
