//! One training run on the bundled toy corpus.
//!
//! cargo run --release --example train_toy -- [estimator] [steps] [seed]

use std::time::Instant;

use mapo::dsl::Grammar;
use mapo::env::make_toy_corpus;
use mapo::memory::{warm_start, Coverage, PruningRules};
use mapo::policy::Policy;
use mapo::trainer::{run_experiment, Corpus, Estimator, TrainerConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let estimator = args
        .next()
        .map(|s| Estimator::from_name(&s).expect("estimator: mapo|reinforce|mml|hard_em|iml"))
        .unwrap_or(Estimator::Mapo);
    let steps = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let corpus = Corpus::from_toy(&make_toy_corpus(7, 20, 5), &Grammar::default());
    let cfg = TrainerConfig {
        estimator,
        seed,
        total_steps: steps,
        learning_rate: std::env::var("LR").ok().and_then(|v| v.parse().ok()).unwrap_or(1e-3),
        ..TrainerConfig::default()
    };
    let t0 = Instant::now();
    let mems = warm_start(
        &corpus.train,
        &Policy::new(cfg.features.clone()),
        cfg.warm_start_attempts,
        Some(&PruningRules::default()),
        &cfg.explored,
        7,
    );
    let cov = Coverage::of(&mems);
    println!(
        "warm start: {}/{} buffers non-empty, {} programs, {:.1?}",
        cov.non_empty,
        cov.examples,
        cov.total_programs,
        t0.elapsed()
    );
    let out = run_experiment(&cfg, &corpus, Some(mems), None).expect("training run");
    for r in out.log.iter().filter(|r| r.dev_accuracy.is_some()) {
        println!(
            "step {:4}  train reward {:.2}  dev {:.2}  clip {:.2}  pi_B {:.3}",
            r.step,
            r.mean_reward,
            r.dev_accuracy.unwrap(),
            r.clip_fraction,
            r.mean_pi_b
        );
    }
    println!(
        "{}: best dev {:.3} at step {}, {} samples in {:.1?}",
        estimator.name(),
        out.best_dev_accuracy,
        out.best_step,
        out.samples,
        out.elapsed
    );
}
