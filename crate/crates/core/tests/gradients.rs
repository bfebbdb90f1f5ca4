//! Analytic gradients against central finite differences along random
//! directions.

mod common;

use common::{directional_fd, random_direction as direction};
use mapo::estimators::{exact_gradient, exact_objective, iml_gradient, mml_gradient};
use mapo::fixtures::tiny_instance;
use mapo::policy::log_sum_exp;
use mapo::rng::stream_rng;
use rand::seq::SliceRandom;
use rand::Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-5;

fn check(name: &str, analytic: f64, fd: f64) {
    let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8);
    assert!(rel <= TOL, "{name}: analytic {analytic} fd {fd} rel {rel:e}");
}

#[test]
fn grad_log_prob_matches_finite_differences() {
    let mut rng = stream_rng(21, 0);
    for probe in 0..100 {
        let inst = tiny_instance(probe / 10, 1.0);
        let (p, _) = inst.space.choose(&mut rng).unwrap().clone();
        let d = direction(&inst.policy, &mut rng);
        let g = inst.policy.grad_log_prob(&inst.ctx, &p).unwrap();
        let fd = directional_fd(&inst.policy, &d, H, |pol| pol.log_prob(&inst.ctx, &p).unwrap());
        check("grad_log_prob", g.dot(&d), fd);
    }
}

#[test]
fn mml_matches_finite_differences() {
    let mut rng = stream_rng(22, 0);
    for probe in 0..100 {
        let inst = tiny_instance(probe / 10, 1.0);
        let k = rng.gen_range(1..=4);
        let buffer: Vec<_> = inst.space.choose_multiple(&mut rng, k).map(|(p, _)| p.clone()).collect();
        let d = direction(&inst.policy, &mut rng);
        let g = mml_gradient(&inst.ctx, &inst.policy, &buffer).unwrap();
        let fd = directional_fd(&inst.policy, &d, H, |pol| {
            let lps: Vec<f64> = buffer.iter().map(|p| pol.log_prob(&inst.ctx, p).unwrap()).collect();
            log_sum_exp(&lps)
        });
        check("mml", g.dot(&d), fd);
    }
}

#[test]
fn iml_matches_finite_differences() {
    let mut rng = stream_rng(23, 0);
    for probe in 0..100 {
        let inst = tiny_instance(probe / 10, 1.0);
        let k = rng.gen_range(1..=4);
        let buffer: Vec<_> = inst.space.choose_multiple(&mut rng, k).map(|(p, _)| p.clone()).collect();
        let d = direction(&inst.policy, &mut rng);
        let g = iml_gradient(&inst.ctx, &inst.policy, &buffer).unwrap();
        let fd = directional_fd(&inst.policy, &d, H, |pol| {
            buffer.iter().map(|p| pol.log_prob(&inst.ctx, p).unwrap()).sum()
        });
        check("iml", g.dot(&d), fd);
    }
}

#[test]
fn exact_gradient_matches_finite_differences() {
    let mut rng = stream_rng(24, 0);
    for seed in 0..10 {
        let inst = tiny_instance(seed, 1.0);
        let d = direction(&inst.policy, &mut rng);
        let g = exact_gradient(&inst.ctx, &inst.policy, inst.max_tokens).unwrap();
        let fd = directional_fd(&inst.policy, &d, H, |pol| {
            exact_objective(&inst.ctx, pol, inst.max_tokens).unwrap()
        });
        let analytic = g.dot(&d);
        // The objective can be tiny when rewarded programs are unlikely.
        assert!((analytic - fd).abs() <= TOL * analytic.abs().max(fd.abs()).max(1e-6));
    }
}
