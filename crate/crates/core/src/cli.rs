//! The `mapo` command line. Every subcommand returns a [`CliError`] whose
//! [`exit_code`](CliError::exit_code) is 2 for bad input, 3 for I/O and 4
//! for a broken internal invariant.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use crate::analysis::{
    clipping_fraction, optimal_allocation_ratio, spuriousness_report, variance_comparison, variance_ratio_with_baseline,
};
use crate::dsl::{Grammar, Program};
use crate::env::{make_toy_corpus, read_gold, EnvError};
use crate::estimators::BufferMode;
use crate::fixtures::tiny_instance;
use crate::memory::{load_memories, save_memories, warm_start, Coverage, ExploredConfig, PruningRules, StoreError};
use crate::policy::{Policy, PolicyError};
use crate::trainer::{
    predict, run_experiment, ConfigError, Corpus, Estimator, ExperimentError, Optimizer, RunManifest, TrainerConfig,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::MissingExample(_) => CliError::Validation(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Io(_) => CliError::Io(e.to_string()),
            PolicyError::Json(_) | PolicyError::ConfigMismatch { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            ExperimentError::Env(c) => c.into(),
            ExperimentError::Store(c) => c.into(),
            ExperimentError::Policy(c) => c.into(),
            ExperimentError::Io { .. } | ExperimentError::Csv(_) => CliError::Io(e.to_string()),
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "mapo", version, about = "Memory augmented policy optimization on a table DSL")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the toy corpus with its gold-program sidecar.
    GenCorpus(GenCorpusArgs),
    /// Warm start: systematic exploration with a uniform policy.
    Explore(ExploreArgs),
    /// Train with one estimator and write metrics, checkpoints and a manifest.
    Train(TrainArgs),
    /// Beam-search a checkpoint over a corpus split.
    Eval(EvalArgs),
    /// Reports on a finished run.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
pub struct GenCorpusArgs {
    /// Corpus seed.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Number of tables.
    #[arg(long, default_value_t = 20)]
    pub tables: usize,
    /// Questions per table.
    #[arg(long, default_value_t = 5)]
    pub per_table: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExploredKind {
    Exact,
    Bloom,
}

#[derive(Args, Debug)]
pub struct ExploreArgs {
    /// Corpus directory (train.jsonl, tables/).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Exploration descents per training example.
    #[arg(long, default_value_t = 2000)]
    pub attempts: usize,
    /// Trigger-word pruning.
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub rules: Switch,
    /// Explored-set storage.
    #[arg(long, value_enum, default_value_t = ExploredKind::Bloom)]
    pub explored: ExploredKind,
    /// Exploration seed.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory for buffers and explored sets.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON trainer config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus directory.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output of `explore`; without it the warm start runs in-process.
    #[arg(long)]
    pub warmstart: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite a non-empty run directory.
    #[arg(long)]
    pub force: bool,
    /// mapo, reinforce, mml, hard_em or iml.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Trainer seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also settable through MAPO_NUM_ACTORS.
    #[arg(long)]
    pub n_actors: Option<usize>,
    /// Examples per learner batch.
    #[arg(long)]
    pub batch_examples: Option<usize>,
    /// Learner steps between snapshot publications.
    #[arg(long)]
    pub sync_period: Option<usize>,
    /// Optimizer step size.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// sgd or adam.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Learner steps.
    #[arg(long)]
    pub total_steps: Option<usize>,
    /// Steps between dev evaluations (0: end only).
    #[arg(long)]
    pub eval_period: Option<usize>,
    /// Beam size for evaluation.
    #[arg(long)]
    pub beam_size: Option<usize>,
    /// Memory-weight clipping threshold.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// `enumerate` or `sample:N`.
    #[arg(long)]
    pub buffer_mode: Option<String>,
    /// Keep only the k most probable buffer programs per step.
    #[arg(long)]
    pub buffer_top_k: Option<usize>,
    /// Bounded sample-queue capacity.
    #[arg(long)]
    pub queue_capacity: Option<usize>,
    /// Descents per example when warm-starting in-process.
    #[arg(long)]
    pub warm_start_attempts: Option<usize>,
    /// Pruning rules for the in-process warm start.
    #[arg(long, value_enum)]
    pub rules: Option<Switch>,
    /// One exploration descent per example per batch.
    #[arg(long, value_enum)]
    pub explore_during_training: Option<Switch>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Dev,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Policy checkpoint (JSON).
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Corpus directory.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Beam size.
    #[arg(long, default_value_t = 5)]
    pub beam: usize,
    /// Split to evaluate.
    #[arg(long, value_enum, default_value_t = Split::Dev)]
    pub split: Split,
    /// Predictions file; defaults to `predictions.jsonl` beside the checkpoint.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Clip fraction over training and under the final policy.
    #[arg(long)]
    pub clipping: bool,
    /// MAPO vs REINFORCE trace covariance on a tiny enumerable instance,
    /// plus a sweep of the baseline variance ratio.
    #[arg(long)]
    pub variance: bool,
    /// Optimal stratified allocation under the equal-variance assumption.
    #[arg(long)]
    pub allocation: bool,
    /// Fraction of correct dev answers produced by spurious programs.
    #[arg(long)]
    pub spuriousness: bool,
    /// Buffer mass for --allocation.
    #[arg(long, default_value_t = 0.3)]
    pub pi_b: f64,
    /// Shared gradient variance for --allocation.
    #[arg(long, default_value_t = 2.0)]
    pub sigma_sq: f64,
    /// Monte Carlo trials for --variance.
    #[arg(long, default_value_t = 20_000)]
    pub trials: usize,
    /// Corpus directory; defaults to the one recorded in the manifest.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

/// Runs a parsed command line.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenCorpus(a) => cmd_gen_corpus(&a),
        Command::Explore(a) => cmd_explore(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Analyze(a) => cmd_analyze(&a),
    }
}

/// Entry point for the binary: parses, runs, and maps the outcome to an
/// exit code. Panics count as internal invariant violations.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => 4,
    }
}

/// Refuses a non-empty `dir` unless `force`.
fn prepare_out(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir).map_err(io(dir))?.next().is_some();
        if non_empty && !force {
            return Err(CliError::Validation(format!(
                "{} exists and is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(io(dir))
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).expect("json") + "\n";
    fs::write(path, text).map_err(io(path))
}

pub fn cmd_gen_corpus(a: &GenCorpusArgs) -> Result<(), CliError> {
    prepare_out(&a.out, a.force)?;
    if a.tables == 0 {
        log::warn!("--tables 0: writing an empty corpus");
    }
    let corpus = make_toy_corpus(a.seed, a.tables, a.per_table);
    corpus.write(&a.out)?;
    println!(
        "wrote {} train and {} dev examples over {} tables to {}",
        corpus.train.len(),
        corpus.dev.len(),
        corpus.tables.len(),
        a.out.display()
    );
    Ok(())
}

fn explored_config(kind: ExploredKind) -> ExploredConfig {
    match kind {
        ExploredKind::Exact => ExploredConfig::Exact,
        ExploredKind::Bloom => ExploredConfig::default(),
    }
}

pub fn cmd_explore(a: &ExploreArgs) -> Result<(), CliError> {
    let corpus = Corpus::load(&a.corpus, &Grammar::default())?;
    prepare_out(&a.out, a.force)?;
    let rules = (a.rules == Switch::On).then(PruningRules::default);
    let mems = warm_start(
        &corpus.train,
        &Policy::default(),
        a.attempts,
        rules.as_ref(),
        &explored_config(a.explored),
        a.seed,
    );
    save_memories(&a.out, &mems)?;
    let cov = Coverage::of(&mems);
    let summary = json!({
        "examples": cov.examples,
        "non_empty": cov.non_empty,
        "fraction_non_empty": cov.fraction_non_empty(),
        "mean_buffer_size": if cov.examples == 0 { 0.0 } else { cov.total_programs as f64 / cov.examples as f64 },
        "total_programs": cov.total_programs,
        "explored_sequences": cov.explored_sequences,
        "attempts": a.attempts,
        "rules": a.rules == Switch::On,
        "seed": a.seed,
        "corpus_hash": corpus.hash,
    });
    write_json(&a.out.join("coverage.json"), &summary)?;
    println!("{}", serde_json::to_string(&summary).expect("json"));
    Ok(())
}

fn parse_buffer_mode(s: &str) -> Result<BufferMode, CliError> {
    if s == "enumerate" {
        return Ok(BufferMode::Enumerate);
    }
    s.strip_prefix("sample:")
        .and_then(|n| n.parse().ok())
        .map(BufferMode::Sample)
        .ok_or_else(|| CliError::Validation(format!("invalid `buffer_mode`: {s} (enumerate or sample:N)")))
}

/// File (or default) config with flags, then MAPO_NUM_ACTORS, applied on top.
pub fn resolve_config(a: &TrainArgs, env_actors: Option<&str>) -> Result<TrainerConfig, CliError> {
    let mut c = match &a.config {
        Some(p) => TrainerConfig::load(p)?,
        None => TrainerConfig::default(),
    };
    if let Some(v) = env_actors {
        c.n_actors = v
            .parse()
            .map_err(|_| CliError::Validation(format!("invalid `n_actors` in MAPO_NUM_ACTORS: {v}")))?;
    }
    if let Some(e) = &a.estimator {
        c.estimator =
            Estimator::from_name(e).ok_or_else(|| CliError::Validation(format!("invalid `estimator`: {e}")))?;
    }
    if let Some(o) = &a.optimizer {
        c.optimizer = match o.as_str() {
            "sgd" => Optimizer::Sgd,
            "adam" => Optimizer::Adam,
            _ => return Err(CliError::Validation(format!("invalid `optimizer`: {o}"))),
        };
    }
    if let Some(m) = &a.buffer_mode {
        c.buffer_mode = parse_buffer_mode(m)?;
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { c.$f = v; } )* };
    }
    set!(seed, n_actors, batch_examples, sync_period, learning_rate, total_steps, eval_period, beam_size, alpha);
    set!(queue_capacity, warm_start_attempts);
    if a.buffer_top_k.is_some() {
        c.buffer_top_k = a.buffer_top_k;
    }
    if let Some(r) = a.rules {
        c.rules = r == Switch::On;
    }
    if let Some(r) = a.explore_during_training {
        c.explore_during_training = r == Switch::On;
    }
    c.validate()?;
    Ok(c)
}

pub fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let env = std::env::var("MAPO_NUM_ACTORS").ok();
    let cfg = resolve_config(a, env.as_deref())?;
    let corpus = Corpus::load(&a.corpus, &Grammar::default())?;
    let memories = match &a.warmstart {
        Some(dir) => Some(load_memories(dir, &corpus.train, &cfg.explored)?),
        None => None,
    };
    prepare_out(&a.out, a.force)?;
    let out = run_experiment(&cfg, &corpus, memories, Some(&a.out))?;
    println!(
        "{}: {} steps, best dev accuracy {:.4} at step {}, {} samples in {:.1?}",
        cfg.estimator.name(),
        out.log.len(),
        out.best_dev_accuracy,
        out.best_step,
        out.samples,
        out.elapsed
    );
    Ok(())
}

fn manifest_beside(path: &Path) -> Option<RunManifest> {
    let m = path.parent()?.join("manifest.json");
    m.exists().then(|| RunManifest::load(&m).ok()).flatten()
}

pub fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let policy = Policy::load(&a.checkpoint)?;
    let corpus = Corpus::load(&a.corpus, &Grammar::default())?;
    if let Some(m) = manifest_beside(&a.checkpoint) {
        if m.corpus_hash != corpus.hash {
            return Err(CliError::Validation(format!(
                "checkpoint was trained on corpus {} but {} hashes to {}",
                m.corpus_hash,
                a.corpus.display(),
                corpus.hash
            )));
        }
        if m.config.features.fingerprint() != policy.config().fingerprint() {
            return Err(CliError::Validation("checkpoint feature config differs from its run manifest".into()));
        }
    }
    let contexts = match a.split {
        Split::Train => &corpus.train,
        Split::Dev => &corpus.dev,
    };
    let preds = predict(&policy, contexts, a.beam);
    let acc = if preds.is_empty() {
        log::warn!("empty split; accuracy defined as 0");
        0.0
    } else {
        preds.iter().filter(|p| p.correct).count() as f64 / preds.len() as f64
    };
    let path = a
        .predictions
        .clone()
        .unwrap_or_else(|| a.checkpoint.with_file_name("predictions.jsonl"));
    let mut text = String::new();
    for p in &preds {
        text.push_str(&serde_json::to_string(p).expect("prediction json"));
        text.push('\n');
    }
    fs::write(&path, text).map_err(io(&path))?;
    println!("accuracy {acc:.4} ({} examples, beam {})", preds.len(), a.beam);
    Ok(())
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T, CliError> {
    rec.get(i)
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| CliError::Validation(format!("{}: malformed metrics row", path.display())))
}

/// (step, mean_reward, clip_fraction) per metrics row.
fn read_metrics(path: &Path) -> Result<Vec<(usize, f64, f64)>, CliError> {
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        out.push((parse_field(&rec, 0, path)?, parse_field(&rec, 2, path)?, parse_field(&rec, 4, path)?));
    }
    Ok(out)
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    let manifest_path = a.run.join("manifest.json");
    if !manifest_path.exists() {
        return Err(CliError::Io(format!("{}: no run manifest", manifest_path.display())));
    }
    let manifest = RunManifest::load(&manifest_path)?;
    let any = a.clipping || a.variance || a.allocation || a.spuriousness;
    let load_corpus = || -> Result<Corpus, CliError> {
        let dir = a
            .corpus
            .clone()
            .or_else(|| manifest.corpus_dir.clone().map(PathBuf::from))
            .ok_or_else(|| CliError::Validation("no corpus recorded in the manifest; pass --corpus".into()))?;
        Ok(Corpus::load(&dir, &Grammar::default())?)
    };
    if a.clipping || !any {
        let rows = read_metrics(&a.run.join("metrics.csv"))?;
        let corpus = load_corpus()?;
        let mems = load_memories(&a.run.join("memory"), &corpus.train, &manifest.config.explored)?;
        let policy = Policy::load(&a.run.join("final.json"))?;
        let buffers: Vec<Vec<Program>> = mems.iter().map(|m| m.buffer.programs().to_vec()).collect();
        let final_clip = clipping_fraction(&corpus.train, &buffers, &policy, manifest.config.alpha);
        let report = json!({
            "alpha": manifest.config.alpha,
            "step": rows.iter().map(|r| r.0).collect::<Vec<_>>(),
            "mean_reward": rows.iter().map(|r| r.1).collect::<Vec<_>>(),
            "clip_fraction": rows.iter().map(|r| r.2).collect::<Vec<_>>(),
            "final_policy_clip_fraction": final_clip,
        });
        write_json(&a.run.join("analysis_clipping.json"), &report)?;
        println!("clipping: final-policy clip fraction {final_clip:.4} over {} logged steps", rows.len());
    }
    if a.variance {
        let inst = tiny_instance(manifest.seed, 1.0);
        let (m, r) = variance_comparison(&inst, 2, a.trials, manifest.seed).map_err(|e| CliError::Validation(e.to_string()))?;
        let report = json!({
            "instance": inst.ctx.id(),
            "programs": inst.space.len(),
            "rewarded": inst.rewarded().len(),
            "k": 2,
            "trials": a.trials,
            "mapo_trace_cov": m.trace_cov,
            "reinforce_trace_cov": r.trace_cov,
            "ratio": m.trace_cov / r.trace_cov,
        });
        write_json(&a.run.join("analysis_variance.json"), &report)?;
        let mut w = csv::Writer::from_path(a.run.join("variance_sweep.csv"))
            .map_err(|e| CliError::Io(e.to_string()))?;
        w.write_record(["pi_b", "sigma_minus_over_plus", "ratio"]).map_err(|e| CliError::Io(e.to_string()))?;
        for s in [0.5, 1.0, 2.0] {
            for i in 0..=20 {
                let pi_b = i as f64 / 20.0;
                let ratio = variance_ratio_with_baseline(1.0, s, pi_b).expect("positive sigma");
                w.write_record([pi_b.to_string(), s.to_string(), ratio.to_string()])
                    .map_err(|e| CliError::Io(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        println!(
            "variance: mapo {:.4e} vs reinforce {:.4e} (ratio {:.3})",
            m.trace_cov,
            r.trace_cov,
            m.trace_cov / r.trace_cov
        );
    }
    if a.allocation {
        let var_plus = (1.0 - a.pi_b).powi(2) * a.sigma_sq;
        let var_minus = a.pi_b.powi(2) * a.sigma_sq;
        let ratio = optimal_allocation_ratio(a.pi_b, var_plus, var_minus).map_err(|e| CliError::Validation(e.to_string()))?;
        let report = json!({"pi_b": a.pi_b, "sigma_sq": a.sigma_sq, "var_plus": var_plus, "var_minus": var_minus, "k_plus_over_k_minus": ratio});
        write_json(&a.run.join("analysis_allocation.json"), &report)?;
        println!("allocation: k+/k- = {ratio}");
    }
    if a.spuriousness {
        let corpus = load_corpus()?;
        let dir = corpus.source.clone().expect("loaded from disk");
        let gold: HashMap<String, Program> = read_gold(&dir.join("gold.jsonl"))?
            .into_iter()
            .map(|g| {
                Program::parse(&g.gold_program)
                    .map(|p| (g.id.clone(), p))
                    .map_err(|e| CliError::Validation(format!("gold program for {}: {e}", g.id)))
            })
            .collect::<Result<_, _>>()?;
        let policy = Policy::load(&a.run.join("best.json"))?;
        let report = spuriousness_report(&policy, &corpus.dev, &gold, manifest.config.beam_size, manifest.seed);
        write_json(&a.run.join("analysis_spuriousness.json"), &serde_json::to_value(&report).expect("json"))?;
        println!(
            "spuriousness: {}/{} correct dev answers come from spurious programs",
            report.n_spurious, report.n_correct
        );
    }
    Ok(())
}
