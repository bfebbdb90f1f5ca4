//! Systematic exploration with a uniform policy and pruning rules, the
//! warm start for every training run.

use std::time::Instant;

use mapo::dsl::Grammar;
use mapo::env::make_toy_corpus;
use mapo::memory::{warm_start, Coverage, ExploredConfig, PruningRules};
use mapo::policy::Policy;

fn main() {
    let attempts: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    let corpus = make_toy_corpus(7, 20, 5);
    let (train, dev) = corpus.contexts(&Grammar::default());
    let all: Vec<_> = train.into_iter().chain(dev).collect();
    let t0 = Instant::now();
    let mems = warm_start(&all, &Policy::default(), attempts, Some(&PruningRules::default()), &ExploredConfig::Exact, 7);
    let cov = Coverage::of(&mems);
    println!("{attempts} attempts/example in {:.1?}", t0.elapsed());
    println!(
        "non-empty buffers: {}/{} ({:.1}%), programs found: {}, explored sequences: {}",
        cov.non_empty,
        cov.examples,
        100.0 * cov.fraction_non_empty(),
        cov.total_programs,
        cov.explored_sequences
    );
    for (ctx, _) in all.iter().zip(&mems).filter(|(_, m)| m.buffer.is_empty()) {
        println!("  empty: {} | {}", ctx.id(), ctx.example.question);
    }
    if let Some((ctx, m)) = all.iter().zip(&mems).find(|(_, m)| m.buffer.len() > 1) {
        println!("sample buffer for \"{}\":", ctx.example.question);
        for p in m.buffer.programs().iter().take(5) {
            println!("  {p}");
        }
    }
}
