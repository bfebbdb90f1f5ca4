use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::BufferMode;
use crate::memory::ExploredConfig;
use crate::policy::FeatureConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Mapo,
    Reinforce,
    Mml,
    HardEm,
    Iml,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Mapo,
        Estimator::Reinforce,
        Estimator::Mml,
        Estimator::HardEm,
        Estimator::Iml,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mapo => "mapo",
            Estimator::Reinforce => "reinforce",
            Estimator::Mml => "mml",
            Estimator::HardEm => "hard_em",
            Estimator::Iml => "iml",
        }
    }

    pub fn from_name(s: &str) -> Option<Estimator> {
        Estimator::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Whether the estimator trains from a memory buffer.
    pub fn uses_buffer(self) -> bool {
        self != Estimator::Reinforce
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("config io on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Every knob of a training run. Unknown keys in a config file are errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub estimator: Estimator,
    pub seed: u64,
    pub n_actors: usize,
    /// Examples per learner batch.
    pub batch_examples: usize,
    /// Learner steps between snapshot publications (M).
    pub sync_period: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub total_steps: usize,
    /// Dev evaluation every this many steps; 0 evaluates only at the end.
    pub eval_period: usize,
    pub beam_size: usize,
    pub alpha: f64,
    pub buffer_mode: BufferMode,
    /// Keep only the k most probable buffer programs per step.
    pub buffer_top_k: Option<usize>,
    pub queue_capacity: usize,
    /// Descents per training example before training; 0 skips warm start.
    pub warm_start_attempts: usize,
    /// Trigger-word pruning during warm start.
    pub rules: bool,
    /// One systematic-exploration descent per example per batch.
    pub explore_during_training: bool,
    /// Rewarded on-policy samples join the buffer.
    pub buffer_from_onpolicy: bool,
    pub explored: ExploredConfig,
    pub features: FeatureConfig,
    /// Keep per-step gradients in memory (tests).
    pub record_gradients: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            estimator: Estimator::Mapo,
            seed: 0,
            n_actors: 1,
            batch_examples: 25,
            sync_period: 4,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            total_steps: 200,
            eval_period: 20,
            beam_size: 5,
            alpha: 0.1,
            buffer_mode: BufferMode::Sample(1),
            buffer_top_k: None,
            queue_capacity: 8,
            warm_start_attempts: 2000,
            rules: true,
            explore_during_training: true,
            buffer_from_onpolicy: false,
            explored: ExploredConfig::default(),
            features: FeatureConfig::default(),
            record_gradients: false,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

impl TrainerConfig {
    /// Defaults for the toy-corpus experiments. The log-linear policy needs
    /// a larger step than the default 1e-3 to move within a few hundred
    /// updates.
    pub fn experiment() -> TrainerConfig {
        TrainerConfig {
            learning_rate: 0.1,
            ..TrainerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", format!("{} is outside [0, 1]", self.alpha)));
        }
        if self.n_actors == 0 {
            return Err(invalid("n_actors", "must be at least 1"));
        }
        if self.batch_examples == 0 {
            return Err(invalid("batch_examples", "must be at least 1"));
        }
        if self.sync_period == 0 {
            return Err(invalid("sync_period", "must be at least 1"));
        }
        if self.queue_capacity < self.n_actors {
            return Err(invalid("queue_capacity", "must be at least n_actors"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if self.beam_size == 0 {
            return Err(invalid("beam_size", "must be at least 1"));
        }
        if self.buffer_mode == BufferMode::Sample(0) {
            return Err(invalid("buffer_mode", "sample count must be at least 1"));
        }
        if let ExploredConfig::Bloom { capacity, epsilon, .. } = self.explored {
            if capacity == 0 || !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(invalid("explored", "bloom needs capacity > 0 and epsilon in (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<TrainerConfig, ConfigError> {
        let cfg: TrainerConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<TrainerConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        TrainerConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
