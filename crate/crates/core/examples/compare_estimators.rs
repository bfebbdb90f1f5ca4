//! MAPO against REINFORCE, MML, Hard EM, IML and two MAPO ablations on the
//! toy corpus, several seeds each.
//!
//! cargo run --release --example compare_estimators -- [seeds] [steps]

use std::time::Instant;

use mapo::dsl::Grammar;
use mapo::env::make_toy_corpus;
use mapo::trainer::{compare, shared_warm_start, Corpus, TrainerConfig, Variant};

fn main() {
    let mut args = std::env::args().skip(1);
    let n_seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);
    let steps = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let corpus = Corpus::from_toy(&make_toy_corpus(7, 20, 5), &Grammar::default());
    let base = TrainerConfig {
        total_steps: steps,
        ..TrainerConfig::experiment()
    };
    let t0 = Instant::now();
    let warm = shared_warm_start(&corpus, &base, 7);
    println!("warm start {:.1?}", t0.elapsed());
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let cmp = compare(&corpus, &base, &Variant::ALL, &seeds, &warm, |r| {
        println!(
            "{:13} seed {}  best dev {:.3}  final dev {:.3}  {:.1}s",
            r.variant.name(),
            r.seed,
            r.best_dev_accuracy,
            r.final_dev_accuracy,
            r.seconds
        )
    })
    .expect("comparison");
    println!("\nmean best dev accuracy over {n_seeds} seeds");
    for v in Variant::ALL {
        println!("  {:13} {:.3} ± {:.3}", v.name(), cmp.mean(v), cmp.std(v));
    }
    println!("total {:.1?}", t0.elapsed());
}
