use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{train, ConfigError, StepLog, TrainOutcome, TrainerConfig};
use crate::dsl::Grammar;
use crate::env::{load_dataset, Context, EnvError, ToyCorpus};
use crate::memory::{fingerprint_str, save_memories, warm_start, ExampleMemory, PruningRules, StoreError};
use crate::policy::{Policy, PolicyError};

pub const METRICS_HEADER: &str = "step,estimator,mean_reward,dev_accuracy,clip_fraction,mean_pi_b,queue_depth,version";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Train and dev contexts plus a content hash identifying them.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub train: Vec<Arc<Context>>,
    pub dev: Vec<Arc<Context>>,
    pub hash: String,
    /// Directory the corpus was read from, if any.
    pub source: Option<PathBuf>,
}

impl Corpus {
    pub fn new(train: Vec<Arc<Context>>, dev: Vec<Arc<Context>>) -> Corpus {
        let mut h = String::new();
        let mut seen = BTreeMap::new();
        for (split, ctxs) in [("train", &train), ("dev", &dev)] {
            h.push_str(split);
            for c in ctxs.iter() {
                h.push_str(&serde_json::to_string(&c.example.record()).expect("record json"));
                seen.entry(c.table.name().to_string())
                    .or_insert_with(|| c.table.to_json().to_string());
            }
        }
        for t in seen.values() {
            h.push_str(t);
        }
        Corpus {
            train,
            dev,
            hash: format!("{:032x}", fingerprint_str(&h)),
            source: None,
        }
    }

    pub fn from_toy(toy: &ToyCorpus, grammar: &Grammar) -> Corpus {
        let (train, dev) = toy.contexts(grammar);
        Corpus::new(train, dev)
    }

    /// Reads `train.jsonl`, `dev.jsonl` and `tables/` from a corpus directory.
    pub fn load(dir: &Path, grammar: &Grammar) -> Result<Corpus, EnvError> {
        let tables = dir.join("tables");
        let train = load_dataset(&dir.join("train.jsonl"), &tables, grammar)?;
        let dev_path = dir.join("dev.jsonl");
        let dev = if dev_path.exists() {
            load_dataset(&dev_path, &tables, grammar)?.contexts
        } else {
            Vec::new()
        };
        let mut c = Corpus::new(train.contexts, dev);
        c.source = Some(dir.to_path_buf());
        Ok(c)
    }
}

/// What went into a run directory and what came out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config: TrainerConfig,
    pub corpus_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_dir: Option<String>,
    pub seed: u64,
    pub artifacts: BTreeMap<String, String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub best_dev_accuracy: f64,
    pub best_step: usize,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Config(ConfigError::Json(e)))
    }
}

pub fn write_metrics_csv(path: &Path, log: &[StepLog]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER.split(','))?;
    for r in log {
        w.write_record([
            r.step.to_string(),
            r.estimator.clone(),
            r.mean_reward.to_string(),
            r.dev_accuracy.map(|a| a.to_string()).unwrap_or_default(),
            r.clip_fraction.to_string(),
            r.mean_pi_b.to_string(),
            r.queue_depth.to_string(),
            r.version.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Warm start (unless `memories` is given), training, evaluation and, with
/// `out`, the run directory: `metrics.csv`, `final.json`, `best.json`,
/// `memory/` and `manifest.json`.
pub fn run_experiment(
    cfg: &TrainerConfig,
    corpus: &Corpus,
    memories: Option<Vec<ExampleMemory>>,
    out: Option<&Path>,
) -> Result<TrainOutcome, ExperimentError> {
    cfg.validate()?;
    let started = unix_now();
    let initial = Policy::new(cfg.features.clone());
    let memories = match memories {
        Some(m) => m,
        None => {
            let rules = cfg.rules.then(PruningRules::default);
            warm_start(&corpus.train, &initial, cfg.warm_start_attempts, rules.as_ref(), &cfg.explored, cfg.seed)
        }
    };
    let outcome = train(cfg, initial, &corpus.train, &corpus.dev, memories)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut artifacts = BTreeMap::new();
        let mut put = |k: &str, p: PathBuf| {
            artifacts.insert(k.to_string(), p.file_name().unwrap().to_string_lossy().into_owned());
            p
        };
        write_metrics_csv(&put("metrics", dir.join("metrics.csv")), &outcome.log)?;
        outcome.policy.save(&put("final_checkpoint", dir.join("final.json")))?;
        outcome.best_policy.save(&put("best_checkpoint", dir.join("best.json")))?;
        save_memories(&put("memory", dir.join("memory")), &outcome.memories)?;
        let config_hash = fingerprint_str(&cfg.to_json());
        let manifest = RunManifest {
            run_id: format!("{}-s{}-{:08x}", cfg.estimator.name(), cfg.seed, config_hash as u32),
            config: cfg.clone(),
            corpus_hash: corpus.hash.clone(),
            corpus_dir: corpus.source.as_ref().map(|p| p.display().to_string()),
            seed: cfg.seed,
            artifacts,
            started_unix: started,
            finished_unix: unix_now(),
            best_dev_accuracy: outcome.best_dev_accuracy,
            best_step: outcome.best_step,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest json") + "\n";
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(outcome)
}
