//! The actor-learner loop. Actors own disjoint shards of the training
//! examples (with their buffers and explored sets), turn each batch into
//! weighted samples under a policy snapshot, and push them onto a bounded
//! queue. The single learner pops batches, takes one optimizer step per
//! batch, and republishes the snapshot every `sync_period` steps.

mod compare;
mod config;
mod eval;
mod experiment;
mod optim;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, Sender};
use parking_lot::{Condvar, Mutex};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::env::Context;
use crate::estimators::{
    accumulate, buffer_mass, hard_em_samples, iml_samples, mapo_samples, mml_samples, reinforce_samples, Baseline,
    EstimatorConfig, WeightedSample,
};
use crate::memory::{systematic_explore, truncate_top_k, ExampleMemory};
use crate::policy::{Policy, SparseVector, Trajectory};
use crate::rng::stream_rng;

pub use compare::{compare, shared_warm_start, Comparison, RunSummary, Variant};
pub use config::{ConfigError, Estimator, Optimizer, TrainerConfig};
pub use eval::{evaluate, predict, Prediction};
pub use experiment::{run_experiment, write_metrics_csv, Corpus, ExperimentError, RunManifest, METRICS_HEADER};
pub use optim::OptimizerState;

/// Stream offset for actor randomness, apart from warm-start streams.
const ACTOR_STREAM: u64 = 1 << 32;

/// The random stream actor `actor_id` draws from under `seed`.
pub fn actor_rng(seed: u64, actor_id: usize) -> rand_chacha::ChaCha8Rng {
    stream_rng(seed, ACTOR_STREAM + actor_id as u64)
}

/// Snapshot broadcast from the learner to every actor.
pub struct Mailbox {
    state: Mutex<MailState>,
    cv: Condvar,
}

struct MailState {
    publication: u64,
    policy: Arc<Policy>,
    closed: bool,
}

impl Mailbox {
    pub fn new(policy: Policy) -> Mailbox {
        Mailbox {
            state: Mutex::new(MailState {
                publication: 0,
                policy: Arc::new(policy),
                closed: false,
            }),
            cv: Condvar::new(),
        }
    }

    pub fn publish(&self, policy: Policy) {
        let mut s = self.state.lock();
        s.publication += 1;
        s.policy = Arc::new(policy);
        self.cv.notify_all();
    }

    /// Blocks until publication `min` is out; `None` once closed.
    pub fn wait_for(&self, min: u64) -> Option<(u64, Arc<Policy>)> {
        let mut s = self.state.lock();
        while s.publication < min && !s.closed {
            self.cv.wait(&mut s);
        }
        if s.closed {
            None
        } else {
            Some((s.publication, s.policy.clone()))
        }
    }

    pub fn close(&self) {
        self.state.lock().closed = true;
        self.cv.notify_all();
    }
}

/// A sample headed for the learner, with the example it belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub example: usize,
    pub trajectory: Trajectory,
}

/// Per-example numbers the learner turns into metrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExampleStats {
    pub has_buffer: bool,
    pub pi_b: f64,
    pub clipped: bool,
    pub onpolicy_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub actor_id: usize,
    pub ticket: u64,
    pub policy_version_used: u64,
    pub items: Vec<BatchItem>,
    pub stats: Vec<ExampleStats>,
}

/// One learner step, as written to the metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub estimator: String,
    pub mean_reward: f64,
    pub dev_accuracy: Option<f64>,
    pub clip_fraction: f64,
    pub mean_pi_b: f64,
    /// Batches waiting when the learner went to the queue. Depends on
    /// thread scheduling, so it is the one field reruns may not repeat.
    pub queue_depth: usize,
    pub version: u64,
    pub actor_version: u64,
}

/// Batches and gradients seen by the learner, kept when
/// `record_gradients` is on.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub batches: Vec<SampleBatch>,
    pub gradients: Vec<SparseVector>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: Vec<StepLog>,
    pub policy: Policy,
    pub best_policy: Policy,
    pub best_dev_accuracy: f64,
    pub best_step: usize,
    pub memories: Vec<ExampleMemory>,
    pub trace: Option<Trace>,
    pub samples: usize,
    pub elapsed: Duration,
}

fn to_item(example: usize, version: u64, ctx: &Context, s: WeightedSample) -> BatchItem {
    BatchItem {
        example,
        trajectory: Trajectory {
            example_id: ctx.id().to_string(),
            program: s.program,
            reward: s.reward,
            log_prob: s.log_prob,
            weight: s.weight,
            policy_version: version,
        },
    }
}

/// Work of one actor on one example under snapshot `pol`.
fn actor_example(
    cfg: &TrainerConfig,
    idx: usize,
    ctx: &Context,
    mem: &mut ExampleMemory,
    pol: &Policy,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (Vec<BatchItem>, ExampleStats) {
    let est = cfg.estimator;
    if cfg.explore_during_training && est.uses_buffer() {
        systematic_explore(ctx, pol, &mut mem.explored, &mut mem.buffer, None, rng);
    }
    let buffer = match cfg.buffer_top_k {
        Some(k) => truncate_top_k(&mem.buffer, ctx, pol, k).programs().to_vec(),
        None => mem.buffer.programs().to_vec(),
    };
    let mut stats = ExampleStats {
        has_buffer: !buffer.is_empty(),
        ..ExampleStats::default()
    };
    let samples = match est {
        Estimator::Mapo => {
            let ecfg = EstimatorConfig {
                alpha: cfg.alpha,
                buffer_mode: cfg.buffer_mode,
                n_onpolicy: 1,
            };
            let (samples, diag) = mapo_samples(ctx, pol, &buffer, &ecfg, rng).expect("buffer programs are valid");
            stats.pi_b = diag.pi_b;
            stats.clipped = stats.has_buffer && diag.clipped;
            stats.onpolicy_reward = diag.onpolicy_reward;
            if cfg.buffer_from_onpolicy {
                for s in &samples {
                    if s.reward > 0.0 && !mem.buffer.contains(&s.program) {
                        let _ = mem.buffer.insert(ctx, s.program.clone());
                    }
                }
            }
            samples
        }
        Estimator::Reinforce => {
            let samples = reinforce_samples(ctx, pol, 1, Baseline::None, rng);
            stats.onpolicy_reward = samples[0].reward;
            samples
        }
        Estimator::Mml | Estimator::HardEm | Estimator::Iml => {
            let samples = if buffer.is_empty() {
                Vec::new()
            } else {
                // The likelihood family always enumerates the buffer.
                match est {
                    Estimator::Mml => mml_samples(ctx, pol, &buffer),
                    Estimator::HardEm => hard_em_samples(ctx, pol, &buffer),
                    _ => iml_samples(ctx, pol, &buffer),
                }
                .expect("buffer is non-empty and valid")
            };
            stats.pi_b = buffer_mass(ctx, pol, &buffer).expect("buffer programs are valid");
            stats.clipped = stats.has_buffer && stats.pi_b < cfg.alpha;
            // drawn only for the training-reward metric
            stats.onpolicy_reward = pol.sample(ctx, rng).reward;
            samples
        }
    };
    let items = samples
        .into_iter()
        .map(|s| to_item(idx, pol.version(), ctx, s))
        .collect();
    (items, stats)
}

struct ActorShared {
    cfg: TrainerConfig,
    contexts: Vec<Arc<Context>>,
    mailbox: Arc<Mailbox>,
    tickets: Arc<AtomicU64>,
    tx: Sender<SampleBatch>,
}

fn actor_loop(
    actor_id: usize,
    shard: Vec<usize>,
    mut memories: Vec<(usize, ExampleMemory)>,
    sh: ActorShared,
) -> Vec<(usize, ExampleMemory)> {
    let mut rng = actor_rng(sh.cfg.seed, actor_id);
    if shard.is_empty() {
        return memories;
    }
    let mut order: Vec<usize> = (0..shard.len()).collect();
    let mut pos = order.len();
    let m = sh.cfg.sync_period as u64;
    loop {
        // Ticket t may use any snapshot published after t/M learner
        // publications; a lone actor therefore runs in lockstep.
        let ticket = sh.tickets.fetch_add(1, Ordering::SeqCst);
        let Some((_, pol)) = sh.mailbox.wait_for(ticket / m) else {
            return memories;
        };
        let mut items = Vec::new();
        let mut stats = Vec::new();
        for _ in 0..sh.cfg.batch_examples {
            if pos == order.len() {
                order.shuffle(&mut rng);
                pos = 0;
            }
            let local = order[pos];
            pos += 1;
            let idx = shard[local];
            let (it, st) = actor_example(&sh.cfg, idx, &sh.contexts[idx], &mut memories[local].1, &pol, &mut rng);
            items.extend(it);
            stats.push(st);
        }
        let batch = SampleBatch {
            actor_id,
            ticket,
            policy_version_used: pol.version(),
            items,
            stats,
        };
        if sh.tx.send(batch).is_err() {
            return memories;
        }
    }
}

fn batch_metrics(batch: &SampleBatch) -> (f64, f64, f64) {
    let n = batch.stats.len().max(1) as f64;
    let mean_reward = batch.stats.iter().map(|s| s.onpolicy_reward).sum::<f64>() / n;
    let with: Vec<&ExampleStats> = batch.stats.iter().filter(|s| s.has_buffer).collect();
    if with.is_empty() {
        return (mean_reward, 0.0, 0.0);
    }
    let k = with.len() as f64;
    let clip = with.iter().filter(|s| s.clipped).count() as f64 / k;
    let pi_b = with.iter().map(|s| s.pi_b).sum::<f64>() / k;
    (mean_reward, clip, pi_b)
}

/// Runs Algorithm 2 on `train`, evaluating on `dev`. `memories` are the
/// per-example buffers and explored sets (one per training example).
pub fn train(
    cfg: &TrainerConfig,
    initial: Policy,
    train: &[Arc<Context>],
    dev: &[Arc<Context>],
    memories: Vec<ExampleMemory>,
) -> Result<TrainOutcome, ConfigError> {
    cfg.validate()?;
    assert_eq!(train.len(), memories.len(), "one memory per training example");
    let start = Instant::now();
    let mailbox = Arc::new(Mailbox::new(initial.clone()));
    let tickets = Arc::new(AtomicU64::new(0));
    let (tx, rx): (Sender<SampleBatch>, Receiver<SampleBatch>) = bounded(cfg.queue_capacity);

    let mut shards: Vec<Vec<(usize, ExampleMemory)>> = (0..cfg.n_actors).map(|_| Vec::new()).collect();
    for (i, m) in memories.into_iter().enumerate() {
        shards[i % cfg.n_actors].push((i, m));
    }
    let mut handles = Vec::new();
    if cfg.total_steps > 0 {
        for (a, shard) in shards.drain(..).enumerate() {
            let sh = ActorShared {
                cfg: cfg.clone(),
                contexts: train.to_vec(),
                mailbox: mailbox.clone(),
                tickets: tickets.clone(),
                tx: tx.clone(),
            };
            let idx: Vec<usize> = shard.iter().map(|(i, _)| *i).collect();
            handles.push(
                thread::Builder::new()
                    .name(format!("actor-{a}"))
                    .spawn(move || actor_loop(a, idx, shard, sh))
                    .expect("spawn actor"),
            );
        }
    }
    drop(tx);

    let mut policy = initial;
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate);
    let mut log = Vec::with_capacity(cfg.total_steps);
    let mut trace = cfg.record_gradients.then(Trace::default);
    let mut best_policy = policy.clone();
    let mut best_dev = f64::NEG_INFINITY;
    let mut best_step = 0;
    let mut samples = 0;
    for step in 1..=cfg.total_steps {
        let depth = rx.len();
        let Ok(batch) = rx.recv() else { break };
        let mut g = SparseVector::new();
        for item in &batch.items {
            let t = &item.trajectory;
            let c = t.weight * t.reward;
            if c == 0.0 {
                continue;
            }
            let grad = policy
                .grad_log_prob(&train[item.example], &t.program)
                .expect("sampled programs are valid");
            g.add_scaled(&grad, c);
        }
        samples += batch.items.len();
        opt.ascend(&mut policy, &g);
        if step % cfg.sync_period == 0 {
            mailbox.publish(policy.clone());
        }
        let (mean_reward, clip_fraction, mean_pi_b) = batch_metrics(&batch);
        let due = (cfg.eval_period > 0 && step % cfg.eval_period == 0) || step == cfg.total_steps;
        let dev_accuracy = due.then(|| evaluate(&policy, dev, cfg.beam_size));
        if let Some(acc) = dev_accuracy {
            if acc > best_dev {
                best_dev = acc;
                best_policy = policy.clone();
                best_step = step;
            }
        }
        log.push(StepLog {
            step,
            estimator: cfg.estimator.name().to_string(),
            mean_reward,
            dev_accuracy,
            clip_fraction,
            mean_pi_b,
            queue_depth: depth,
            version: policy.version(),
            actor_version: batch.policy_version_used,
        });
        if let Some(tr) = trace.as_mut() {
            tr.gradients.push(g);
            tr.batches.push(batch);
        }
    }
    mailbox.close();
    drop(rx);
    let mut returned: Vec<(usize, ExampleMemory)> = if cfg.total_steps > 0 {
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("actor panicked"))
            .collect()
    } else {
        shards.into_iter().flatten().collect()
    };
    returned.sort_by_key(|(i, _)| *i);
    if best_dev == f64::NEG_INFINITY {
        best_dev = evaluate(&policy, dev, cfg.beam_size);
        best_policy = policy.clone();
    }
    Ok(TrainOutcome {
        log,
        policy,
        best_policy,
        best_dev_accuracy: best_dev,
        best_step,
        memories: returned.into_iter().map(|(_, m)| m).collect(),
        trace,
        samples,
        elapsed: start.elapsed(),
    })
}

/// Σ w·R·∇log π over a list of weighted samples, exposed so callers can
/// reproduce a learner step outside the loop.
pub fn learner_gradient(ctx: &Context, policy: &Policy, samples: &[WeightedSample]) -> SparseVector {
    accumulate(ctx, policy, samples).expect("sampled programs are valid")
}
