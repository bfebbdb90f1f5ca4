//! Oracles shared by the integration tests. Everything here is computed by
//! brute-force enumeration of small program spaces and never calls the
//! estimator code under test.

#![allow(dead_code)]

use mapo::dsl::Program;
use mapo::env::Context;
use mapo::fixtures::{tiny_instance, TinyInstance};
use mapo::policy::{Policy, SparseVector};
use mapo::trainer::StepLog;

/// π(a) for every program of the instance's space, in space order.
pub fn probabilities(inst: &TinyInstance) -> Vec<f64> {
    inst.space
        .iter()
        .map(|(p, _)| inst.policy.log_prob(&inst.ctx, p).unwrap().exp())
        .collect()
}

pub fn l2(v: &SparseVector) -> f64 {
    v.norm_sq().sqrt()
}

pub fn diff(a: &SparseVector, b: &SparseVector) -> SparseVector {
    let mut d = a.clone();
    d.add_scaled(b, -1.0);
    d
}

/// Σ_a weight(a) · ∇log π(a) over the whole space.
pub fn weighted_grad_sum(inst: &TinyInstance, mut weight: impl FnMut(usize) -> f64) -> SparseVector {
    let mut g = SparseVector::new();
    for (i, (p, _)) in inst.space.iter().enumerate() {
        let w = weight(i);
        if w != 0.0 {
            g.add_scaled(&inst.policy.grad_log_prob(&inst.ctx, p).unwrap(), w);
        }
    }
    g
}

/// Mean and trace covariance of ∇log π under π restricted to the indices
/// in `stratum` and renormalised.
pub fn stratum_moments(inst: &TinyInstance, probs: &[f64], stratum: &[usize]) -> (SparseVector, f64) {
    let mass: f64 = stratum.iter().map(|&i| probs[i]).sum();
    let grads: Vec<SparseVector> = stratum
        .iter()
        .map(|&i| inst.policy.grad_log_prob(&inst.ctx, &inst.space[i].0).unwrap())
        .collect();
    let mut mean = SparseVector::new();
    for (g, &i) in grads.iter().zip(stratum) {
        mean.add_scaled(g, probs[i] / mass);
    }
    let mut trace = 0.0;
    for (g, &i) in grads.iter().zip(stratum) {
        trace += probs[i] / mass * diff(g, &mean).norm_sq();
    }
    (mean, trace)
}

/// Tiny instances whose rewarded set has mass in `[lo, hi]`, scanning
/// seeds upward from `first_seed`.
pub fn balanced_instances(n: usize, scale: f64, lo: f64, hi: f64, first_seed: u64) -> Vec<(u64, TinyInstance, f64)> {
    let mut out = Vec::new();
    let mut seed = first_seed;
    while out.len() < n {
        let inst = tiny_instance(seed, scale);
        let probs = probabilities(&inst);
        let pi_b: f64 = inst
            .space
            .iter()
            .zip(&probs)
            .filter(|((_, r), _)| *r > 0.0)
            .map(|(_, p)| p)
            .sum();
        if (lo..=hi).contains(&pi_b) {
            out.push((seed, inst, pi_b));
        }
        seed += 1;
        assert!(seed < first_seed + 20_000, "instance scan did not find {n} instances");
    }
    out
}

/// Indices of the space that belong to `buffer`.
pub fn buffer_indices(inst: &TinyInstance, buffer: &[Program]) -> Vec<usize> {
    (0..inst.space.len()).filter(|&i| buffer.contains(&inst.space[i].0)).collect()
}

/// All complete programs reachable by walking the grammar's valid-token
/// oracle depth first, without any length bookkeeping beyond the grammar.
pub fn walk_grammar(ctx: &Context) -> Vec<Program> {
    fn go(ctx: &Context, cur: mapo::policy::Cursor, out: &mut Vec<Program>) {
        if cur.is_finished() {
            out.push(Program::new(cur.tokens.clone()));
            return;
        }
        for t in cur.valid_next(ctx) {
            let mut next = cur.clone();
            next.push(t);
            go(ctx, next, out);
        }
    }
    let mut out = Vec::new();
    go(ctx, mapo::policy::Cursor::new(), &mut out);
    out
}

/// Central finite difference of `f` along `dir` at the policy's parameters.
pub fn directional_fd(policy: &Policy, dir: &SparseVector, h: f64, f: impl Fn(&Policy) -> f64) -> f64 {
    let mut plus = policy.clone();
    plus.add_scaled(dir, h);
    let mut minus = policy.clone();
    minus.add_scaled(dir, -h);
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// A random unit direction over the parameters the policy has set.
pub fn random_direction<R: rand::Rng>(policy: &Policy, rng: &mut R) -> SparseVector {
    let mut d: SparseVector = policy
        .params()
        .keys()
        .map(|&id| (id, rng.sample::<f64, _>(rand_distr::StandardNormal)))
        .collect();
    let n = d.norm_sq().sqrt();
    d.scale(1.0 / n);
    d
}

/// Per-component variance of a one-draw estimator that returns
/// `scale(i) · ∇log π(a_i)` with probability `prob(i)`, given its mean.
pub fn one_draw_variance(
    inst: &TinyInstance,
    mean: &SparseVector,
    mut outcome: impl FnMut(usize) -> (f64, f64),
) -> SparseVector {
    let mut m2 = SparseVector::new();
    for (i, (p, _)) in inst.space.iter().enumerate() {
        let (prob, scale) = outcome(i);
        if prob == 0.0 || scale == 0.0 {
            continue;
        }
        for (id, g) in inst.policy.grad_log_prob(&inst.ctx, p).unwrap().iter() {
            m2.add(id, prob * (scale * g).powi(2));
        }
    }
    m2.iter().map(|(id, x)| (id, (x - mean.get(id).powi(2)).max(0.0))).collect()
}

/// A step log with the scheduling-dependent queue depth blanked.
pub fn deterministic_log(log: &[StepLog]) -> Vec<StepLog> {
    log.iter().map(|r| StepLog { queue_depth: 0, ..r.clone() }).collect()
}
