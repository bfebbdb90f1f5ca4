mod common;

use common::*;
use mapo::estimators::*;
use mapo::fixtures::tiny_instance;
use mapo::rng::stream_rng;
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn exact_gradient_matches_enumeration() {
    for seed in 0..5 {
        let inst = tiny_instance(seed, 1.0);
        let probs = probabilities(&inst);
        let oracle = weighted_grad_sum(&inst, |i| probs[i] * inst.space[i].1);
        let g = exact_gradient(&inst.ctx, &inst.policy, inst.max_tokens).unwrap();
        assert!(diff(&g, &oracle).norm_sq().sqrt() <= 1e-12 * (1.0 + l2(&oracle)));
        let obj: f64 = probs.iter().zip(&inst.space).map(|(p, (_, r))| p * r).sum();
        assert!((exact_objective(&inst.ctx, &inst.policy, inst.max_tokens).unwrap() - obj).abs() < 1e-12);
    }
}

#[test]
fn policy_normalises_over_the_space() {
    for seed in 0..5 {
        let inst = tiny_instance(seed, 3.0);
        let total: f64 = probabilities(&inst).iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "seed {seed}: {total}");
    }
}

#[test]
fn stratified_decomposition_on_random_buffers() {
    let mut rng = stream_rng(11, 0);
    for seed in 0..10 {
        let inst = tiny_instance(seed, 2.0);
        let probs = probabilities(&inst);
        let n = inst.space.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let inside: Vec<usize> = idx[..rng.gen_range(1..n)].to_vec();
        let outside: Vec<usize> = (0..n).filter(|i| !inside.contains(i)).collect();
        let pi_b: f64 = inside.iter().map(|&i| probs[i]).sum();
        let r = |i: usize| inst.space[i].1;
        let e_plus: f64 = inside.iter().map(|&i| probs[i] / pi_b * r(i)).sum();
        let e_minus: f64 = outside.iter().map(|&i| probs[i] / (1.0 - pi_b) * r(i)).sum();
        let e: f64 = (0..n).map(|i| probs[i] * r(i)).sum();
        assert!((pi_b * e_plus + (1.0 - pi_b) * e_minus - e).abs() < 1e-9);
        let buffer: Vec<_> = inside.iter().map(|&i| inst.space[i].0.clone()).collect();
        assert!((buffer_mass(&inst.ctx, &inst.policy, &buffer).unwrap() - pi_b).abs() < 1e-9);
    }
}

#[test]
fn enumerate_mode_with_full_rewarded_buffer_is_exact() {
    let (_, inst, pi_b) = balanced_instances(1, 2.0, 0.1, 0.9, 0).remove(0);
    let buffer = inst.rewarded();
    let cfg = EstimatorConfig {
        alpha: 0.1,
        buffer_mode: BufferMode::Enumerate,
        n_onpolicy: 1,
    };
    let exact = exact_gradient(&inst.ctx, &inst.policy, inst.max_tokens).unwrap();
    let mut rng = stream_rng(3, 0);
    for _ in 0..20 {
        let est = mapo_gradient(&inst.ctx, &inst.policy, &buffer, &cfg, &mut rng).unwrap();
        assert!(!est.diagnostics.clipped);
        assert!((est.diagnostics.pi_b - pi_b).abs() < 1e-9);
        assert!(l2(&diff(&est.grad, &exact)) <= 1e-9 * l2(&exact));
    }
}

#[test]
fn sample_mode_is_unbiased_with_full_rewarded_buffer() {
    let (_, inst, _) = balanced_instances(1, 2.0, 0.1, 0.9, 0).remove(0);
    let buffer = inst.rewarded();
    let cfg = EstimatorConfig {
        alpha: 0.0,
        buffer_mode: BufferMode::Sample(1),
        n_onpolicy: 1,
    };
    let exact = exact_gradient(&inst.ctx, &inst.policy, inst.max_tokens).unwrap();
    let mut rng = stream_rng(4, 0);
    let n = 20_000;
    let mut mean = mapo::policy::SparseVector::new();
    for _ in 0..n {
        let g = mapo_gradient(&inst.ctx, &inst.policy, &buffer, &cfg, &mut rng).unwrap().grad;
        mean.add_scaled(&g, 1.0 / n as f64);
    }
    assert!(l2(&diff(&mean, &exact)) <= 0.05 * l2(&exact));
}

#[test]
fn rejected_draws_shrink_the_outside_term() {
    // A buffer holding part of the rewarded set: rejected on-policy draws
    // are dropped, so the outside contribution is scaled by (1 - π_B).
    let inst = (0..200)
        .map(|s| tiny_instance(s, 1.0))
        .find(|i| i.rewarded().len() >= 4)
        .unwrap();
    let probs = probabilities(&inst);
    let rewarded = inst.rewarded();
    let buffer = rewarded[..rewarded.len() / 2].to_vec();
    let inside = buffer_indices(&inst, &buffer);
    let pi_b: f64 = inside.iter().map(|&i| probs[i]).sum();
    let w = pi_b.max(0.0);
    let expected = weighted_grad_sum(&inst, |i| {
        let r = inst.space[i].1;
        if inside.contains(&i) {
            w * probs[i] / pi_b * r
        } else {
            (1.0 - w) * probs[i] * r
        }
    });
    let cfg = EstimatorConfig {
        alpha: 0.0,
        buffer_mode: BufferMode::Enumerate,
        n_onpolicy: 1,
    };
    let mut rng = stream_rng(5, 0);
    let n = 40_000;
    let mut mean = mapo::policy::SparseVector::new();
    for _ in 0..n {
        let g = mapo_gradient(&inst.ctx, &inst.policy, &buffer, &cfg, &mut rng).unwrap().grad;
        mean.add_scaled(&g, 1.0 / n as f64);
    }
    assert!(l2(&diff(&mean, &expected)) <= 0.1 * l2(&expected).max(1e-12));
}

#[test]
fn clipped_weights_are_alpha_and_one_minus_alpha() {
    let inst = (0..200)
        .map(|s| tiny_instance(s, 1.0))
        .find(|i| {
            let b = i.rewarded();
            let m = buffer_mass(&i.ctx, &i.policy, &b).unwrap();
            m > 0.0 && m < 0.05
        })
        .unwrap();
    let buffer = inst.rewarded();
    let cfg = EstimatorConfig {
        alpha: 0.1,
        buffer_mode: BufferMode::Enumerate,
        n_onpolicy: 1,
    };
    let mut rng = stream_rng(6, 0);
    for _ in 0..50 {
        let (samples, d) = mapo_samples(&inst.ctx, &inst.policy, &buffer, &cfg, &mut rng).unwrap();
        assert!(d.clipped);
        let inside: f64 = samples[..buffer.len()].iter().map(|s| s.weight).sum();
        assert!((inside - 0.1).abs() < 1e-12);
        if let Some(out) = samples.get(buffer.len()) {
            assert_eq!(out.weight, 0.9);
        }
    }
}

#[test]
fn empty_buffer_reduces_to_reinforce() {
    let inst = tiny_instance(2, 1.0);
    let cfg = EstimatorConfig::default();
    let mut a = stream_rng(9, 0);
    let mut b = stream_rng(9, 0);
    for _ in 0..50 {
        let m = mapo_gradient(&inst.ctx, &inst.policy, &[], &cfg, &mut a).unwrap();
        let r = reinforce_gradient(&inst.ctx, &inst.policy, 1, Baseline::None, &mut b);
        assert_eq!(m.grad, r.grad);
        assert!(!m.diagnostics.clipped);
        assert_eq!(m.diagnostics.pi_b, 0.0);
    }
}

#[test]
fn batch_mean_baseline_zero_when_rewards_equal() {
    let inst = tiny_instance(7, 1.0);
    // Rewards on this instance are rare, so most batches are all zero.
    let mut rng = stream_rng(1, 0);
    let mut zero_batches = 0;
    for _ in 0..50 {
        let samples = reinforce_samples(&inst.ctx, &inst.policy, 4, Baseline::BatchMean, &mut rng);
        let rewards: Vec<f64> = samples.iter().map(|s| inst.ctx.reward(&s.program)).collect();
        if rewards.iter().all(|r| *r == rewards[0]) {
            zero_batches += 1;
            assert!(samples.iter().all(|s| s.reward == 0.0));
        }
    }
    assert!(zero_batches > 0);
}

#[test]
fn likelihood_family_small_cases() {
    let inst = tiny_instance(1, 1.0);
    let buf = inst.rewarded();
    let one = &buf[..1];
    let g1 = inst.policy.grad_log_prob(&inst.ctx, &one[0]).unwrap();
    assert_eq!(mml_gradient(&inst.ctx, &inst.policy, one).unwrap(), g1);
    assert_eq!(hard_em_gradient(&inst.ctx, &inst.policy, one).unwrap(), g1);
    assert_eq!(iml_gradient(&inst.ctx, &inst.policy, one).unwrap(), g1);
    assert!(matches!(mml_gradient(&inst.ctx, &inst.policy, &[]), Err(EstimatorError::EmptyBuffer)));
    assert!(matches!(hard_em_gradient(&inst.ctx, &inst.policy, &[]), Err(EstimatorError::EmptyBuffer)));
    assert!(matches!(iml_gradient(&inst.ctx, &inst.policy, &[]), Err(EstimatorError::EmptyBuffer)));

    // Uniform policy: equal posteriors, so IML = |B| · MML.
    let uniform = mapo::policy::Policy::new(inst.policy.config().clone());
    let mml = mml_gradient(&inst.ctx, &uniform, &buf[..2]).unwrap();
    let iml = iml_gradient(&inst.ctx, &uniform, &buf[..2]).unwrap();
    let lp: Vec<f64> = buf[..2].iter().map(|p| uniform.log_prob(&inst.ctx, p).unwrap()).collect();
    if (lp[0] - lp[1]).abs() < 1e-12 {
        assert!(l2(&diff(&iml, &mml.scaled(2.0))) < 1e-12);
    }

    // Hard EM picks the more probable member.
    let probs: Vec<f64> = buf.iter().map(|p| inst.policy.log_prob(&inst.ctx, p).unwrap()).collect();
    let best = (0..buf.len()).max_by(|&a, &b| probs[a].total_cmp(&probs[b])).unwrap();
    let want = inst.policy.grad_log_prob(&inst.ctx, &buf[best]).unwrap();
    assert_eq!(hard_em_gradient(&inst.ctx, &inst.policy, &buf).unwrap(), want);
}
