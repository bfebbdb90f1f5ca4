mod common;

use std::collections::BTreeSet;

use mapo::dsl::Program;
use mapo::env::{count_programs, enumerate_programs};
use mapo::fixtures::{olympics_context, tiny_instance};
use mapo::memory::{systematic_explore, BloomFilter, ExploreOutcome, ExploredConfig, MemoryBuffer};
use mapo::rng::stream_rng;
use rand::Rng;

#[test]
fn exploration_visits_each_program_once_then_dead_ends() {
    for seed in [0, 3, 8] {
        let inst = tiny_instance(seed, 1.0);
        let mut explored = ExploredConfig::Exact.build();
        let mut buffer = MemoryBuffer::new(inst.ctx.id());
        let mut rng = stream_rng(seed, 9);
        let mut seen = BTreeSet::new();
        let mut dead_after_done = 0;
        for _ in 0..4 * inst.space.len() {
            match systematic_explore(&inst.ctx, &inst.policy, &mut explored, &mut buffer, None, &mut rng) {
                ExploreOutcome::Complete(t) => {
                    assert!(seen.len() < inst.space.len());
                    assert!(seen.insert(t.program.render()), "revisited {}", t.program.render());
                }
                ExploreOutcome::DeadEnd if seen.len() == inst.space.len() => dead_after_done += 1,
                ExploreOutcome::DeadEnd => {}
            }
        }
        let space: BTreeSet<String> = inst.space.iter().map(|(p, _)| p.render()).collect();
        assert_eq!(seen, space);
        assert!(dead_after_done > 0);
        let got: BTreeSet<&Program> = buffer.programs().iter().collect();
        let want: Vec<Program> = inst.rewarded();
        assert_eq!(got, want.iter().collect());
    }
}

#[test]
fn grammar_walk_agrees_with_enumeration() {
    let inst = tiny_instance(0, 1.0);
    let walked: BTreeSet<Program> = common::walk_grammar(&inst.ctx).into_iter().collect();
    let enumerated: BTreeSet<Program> = inst.space.iter().map(|(p, _)| p.clone()).collect();
    assert_eq!(walked, enumerated);
    assert_eq!(count_programs(&inst.ctx, inst.max_tokens), enumerated.len() as u128);
    for p in &walked {
        let v = mapo::dsl::execute(p, &inst.ctx.table);
        assert!(
            !matches!(v.error_code(), Some(mapo::dsl::ErrorCode::TypeError | mapo::dsl::ErrorCode::Incomplete)),
            "{} -> {v:?}",
            p.render()
        );
    }
}

#[test]
fn olympics_space_contains_the_gold_program() {
    let ctx = olympics_context();
    let gold = Program::parse("(filter_in all_rows ['1st'] r.position-str) (last v0) (hop v1 r.venue-str) <EOS>").unwrap();
    let space = enumerate_programs(&ctx, gold.len()).unwrap();
    let hit = space.iter().find(|(p, _)| *p == gold).expect("gold in space");
    assert_eq!(hit.1, 1.0);
}

#[test]
fn bloom_false_positive_rate_near_target() {
    let eps = 0.01;
    let n = 100_000u64;
    let mut bf = BloomFilter::with_rate(n, eps, 5);
    let mut rng = stream_rng(77, 0);
    for _ in 0..n {
        bf.insert(rng.gen::<u128>());
    }
    let probes = 200_000;
    let fp = (0..probes).filter(|_| bf.contains(rng.gen::<u128>())).count() as f64 / probes as f64;
    assert!(fp >= eps / 2.0 && fp <= 2.0 * eps, "fp rate {fp}");
}

#[test]
fn sampler_matches_policy_distribution() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let inst = tiny_instance(4, 1.0);
    let probs = common::probabilities(&inst);
    let n = 50_000usize;
    let mut counts = vec![0usize; probs.len()];
    let mut rng = stream_rng(8, 0);
    for _ in 0..n {
        let t = inst.policy.sample(&inst.ctx, &mut rng);
        let i = inst.space.iter().position(|(p, _)| *p == t.program).expect("sample in space");
        counts[i] += 1;
        assert!((t.log_prob - probs[i].ln()).abs() < 1e-9);
    }
    // Pool cells with small expected counts into one.
    let (mut chi, mut cells, mut pooled_e, mut pooled_o) = (0.0, 0usize, 0.0, 0.0);
    for (p, c) in probs.iter().zip(&counts) {
        let e = p * n as f64;
        if e < 5.0 {
            pooled_e += e;
            pooled_o += *c as f64;
        } else {
            chi += (*c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_e > 0.0 {
        chi += (pooled_o - pooled_e).powi(2) / pooled_e;
        cells += 1;
    }
    let p_value = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(chi);
    assert!(p_value > 1e-3, "chi2 {chi} over {cells} cells, p {p_value}");
}
