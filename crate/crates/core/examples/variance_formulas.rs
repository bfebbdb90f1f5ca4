//! When does a baseline help a stratified estimator, and how should the
//! sample budget be split between the two strata?

use mapo::analysis::{optimal_allocation_ratio, variance_ratio_with_baseline};

fn main() {
    println!("variance ratio (with / without baseline), sigma+^2 = sigma-^2 = 1:");
    for pi_b in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let r = variance_ratio_with_baseline(1.0, 1.0, pi_b).unwrap();
        println!("  pi_B {pi_b:.1}: {r:.3}{}", if r < 1.0 { "  baseline helps" } else { "" });
    }
    println!("optimal k+/k- with per-stratum variances (1-pi)^2 s, pi^2 s:");
    for pi_b in [0.05, 0.5, 0.95] {
        let r = optimal_allocation_ratio(pi_b, (1.0 - pi_b) * (1.0 - pi_b), pi_b * pi_b).unwrap();
        println!("  pi_B {pi_b:.2}: {r:.6}");
    }
}
