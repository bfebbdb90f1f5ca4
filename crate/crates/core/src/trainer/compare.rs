use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{run_experiment, Corpus, Estimator, ExperimentError, TrainerConfig};
use crate::memory::{warm_start, ExampleMemory, PruningRules};
use crate::policy::Policy;

/// One arm of the estimator comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Mapo,
    Reinforce,
    Mml,
    HardEm,
    Iml,
    /// No warm start and no exploration; the buffer only collects
    /// rewarded on-policy samples.
    MapoNoSe,
    /// α = 0.
    MapoNoClip,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Mapo,
        Variant::Reinforce,
        Variant::Mml,
        Variant::HardEm,
        Variant::Iml,
        Variant::MapoNoSe,
        Variant::MapoNoClip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mapo => "mapo",
            Variant::Reinforce => "reinforce",
            Variant::Mml => "mml",
            Variant::HardEm => "hard_em",
            Variant::Iml => "iml",
            Variant::MapoNoSe => "mapo_no_se",
            Variant::MapoNoClip => "mapo_no_clip",
        }
    }

    /// `base` adjusted for this arm.
    pub fn config(self, base: &TrainerConfig) -> TrainerConfig {
        let mut c = base.clone();
        c.estimator = match self {
            Variant::Reinforce => Estimator::Reinforce,
            Variant::Mml => Estimator::Mml,
            Variant::HardEm => Estimator::HardEm,
            Variant::Iml => Estimator::Iml,
            _ => Estimator::Mapo,
        };
        match self {
            Variant::MapoNoSe => {
                c.warm_start_attempts = 0;
                c.explore_during_training = false;
                c.buffer_from_onpolicy = true;
            }
            Variant::MapoNoClip => c.alpha = 0.0,
            _ => {}
        }
        c
    }

    fn uses_warm_start(self) -> bool {
        !matches!(self, Variant::Reinforce | Variant::MapoNoSe)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: Variant,
    pub seed: u64,
    pub best_dev_accuracy: f64,
    pub final_dev_accuracy: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub runs: Vec<RunSummary>,
}

impl Comparison {
    /// Mean best-checkpoint dev accuracy over seeds.
    pub fn mean(&self, v: Variant) -> f64 {
        let xs: Vec<f64> = self.runs.iter().filter(|r| r.variant == v).map(|r| r.best_dev_accuracy).collect();
        if xs.is_empty() {
            f64::NAN
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    }

    pub fn std(&self, v: Variant) -> f64 {
        let xs: Vec<f64> = self.runs.iter().filter(|r| r.variant == v).map(|r| r.best_dev_accuracy).collect();
        if xs.len() < 2 {
            return 0.0;
        }
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    }
}

/// Shared warm start: computed once with `seed` and pruning rules, then
/// cloned into every run that uses one.
pub fn shared_warm_start(corpus: &Corpus, base: &TrainerConfig, seed: u64) -> Vec<ExampleMemory> {
    warm_start(
        &corpus.train,
        &Policy::new(base.features.clone()),
        base.warm_start_attempts,
        base.rules.then(PruningRules::default).as_ref(),
        &base.explored,
        seed,
    )
}

/// Trains every variant under every seed. `progress` sees each run as it
/// finishes.
pub fn compare(
    corpus: &Corpus,
    base: &TrainerConfig,
    variants: &[Variant],
    seeds: &[u64],
    warm: &[ExampleMemory],
    mut progress: impl FnMut(&RunSummary),
) -> Result<Comparison, ExperimentError> {
    let mut runs = Vec::new();
    let warm = Arc::new(warm.to_vec());
    for &v in variants {
        for &seed in seeds {
            let mut cfg = v.config(base);
            cfg.seed = seed;
            let mems = if v.uses_warm_start() {
                warm.as_ref().clone()
            } else {
                corpus
                    .train
                    .iter()
                    .map(|c| ExampleMemory::new(c, &cfg.explored))
                    .collect()
            };
            let out = run_experiment(&cfg, corpus, Some(mems), None)?;
            let final_dev = out
                .log
                .iter()
                .rev()
                .find_map(|r| r.dev_accuracy)
                .unwrap_or(out.best_dev_accuracy);
            let s = RunSummary {
                variant: v,
                seed,
                best_dev_accuracy: out.best_dev_accuracy,
                final_dev_accuracy: final_dev,
                seconds: Duration::as_secs_f64(&out.elapsed),
            };
            progress(&s);
            runs.push(s);
        }
    }
    Ok(Comparison { runs })
}
