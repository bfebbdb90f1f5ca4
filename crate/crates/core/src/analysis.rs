//! Diagnostics: clipping fraction, empirical gradient variance, the
//! baseline trade-off and stratified allocation formulas, and a
//! perturbation test for spurious programs.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{denotation_strings, execute, Cell, Date, Program, Table};
use crate::env::Context;
use crate::estimators::buffer_mass;
use crate::policy::{Policy, SparseVector};
use crate::rng::stream_rng;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("need at least 2 trials, got {0}")]
    TooFewTrials(usize),
    #[error("sigma_plus_sq must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("degenerate allocation: {0}")]
    Degenerate(String),
}

/// Share of non-empty buffers whose mass under `policy` is below `alpha`.
pub fn clipping_fraction(contexts: &[Arc<Context>], buffers: &[Vec<Program>], policy: &Policy, alpha: f64) -> f64 {
    let mut non_empty = 0usize;
    let mut clipped = 0usize;
    for (ctx, b) in contexts.iter().zip(buffers) {
        if b.is_empty() {
            continue;
        }
        non_empty += 1;
        let pi_b = buffer_mass(ctx, policy, b).expect("buffer programs are valid");
        if pi_b < alpha {
            clipped += 1;
        }
    }
    if non_empty == 0 {
        0.0
    } else {
        clipped as f64 / non_empty as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub estimator_name: String,
    pub n_trials: usize,
    pub mean_grad: SparseVector,
    /// Sum of per-component unbiased sample variances.
    pub trace_cov: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_component_var: Option<SparseVector>,
}

impl VarianceReport {
    /// Standard error of the mean for component `id`.
    pub fn std_error(&self, id: u64) -> Option<f64> {
        self.per_component_var
            .as_ref()
            .map(|v| (v.get(id) / self.n_trials as f64).sqrt())
    }
}

/// Runs `estimator` `n_trials` times and reports the sample mean and the
/// trace of the sample covariance. Components never touched count as zero.
pub fn estimator_variance<R: Rng + ?Sized>(
    name: &str,
    mut estimator: impl FnMut(&mut R) -> SparseVector,
    n_trials: usize,
    rng: &mut R,
    keep_components: bool,
) -> Result<VarianceReport, AnalysisError> {
    if n_trials < 2 {
        return Err(AnalysisError::TooFewTrials(n_trials));
    }
    // Running sums per component; a component absent from a trial is zero.
    let mut sums: HashMap<u64, (f64, f64)> = HashMap::new();
    for _ in 0..n_trials {
        for (id, x) in estimator(rng).iter() {
            let e = sums.entry(id).or_insert((0.0, 0.0));
            e.0 += x;
            e.1 += x * x;
        }
    }
    let n = n_trials as f64;
    let mut mean = SparseVector::new();
    let mut var = SparseVector::new();
    let mut trace = 0.0;
    for (&id, &(s, sq)) in &sums {
        let m = s / n;
        let v = ((sq - n * m * m) / (n - 1.0)).max(0.0);
        mean.add(id, m);
        var.add(id, v);
        trace += v;
    }
    Ok(VarianceReport {
        estimator_name: name.to_string(),
        n_trials,
        mean_grad: mean,
        trace_cov: trace,
        per_component_var: keep_components.then_some(var),
    })
}

/// Variance with baseline b = π_B and one sample per stratum, relative to
/// sampling the buffer alone without baseline:
/// (1 + σ−²/σ+²)(1 − π_B)².
pub fn variance_ratio_with_baseline(sigma_plus_sq: f64, sigma_minus_sq: f64, pi_b: f64) -> Result<f64, AnalysisError> {
    if !(sigma_plus_sq > 0.0) {
        return Err(AnalysisError::NonPositiveSigma(sigma_plus_sq));
    }
    Ok((1.0 + sigma_minus_sq / sigma_plus_sq) * (1.0 - pi_b).powi(2))
}

/// Optimal k+/k− for stratified sampling: π_B √Var+ / ((1 − π_B) √Var−).
pub fn optimal_allocation_ratio(pi_b: f64, var_plus: f64, var_minus: f64) -> Result<f64, AnalysisError> {
    let den = (1.0 - pi_b) * var_minus.sqrt();
    if !(den > 0.0) || var_plus < 0.0 {
        return Err(AnalysisError::Degenerate(format!(
            "pi_b={pi_b}, var_plus={var_plus}, var_minus={var_minus}"
        )));
    }
    Ok(pi_b * var_plus.sqrt() / den)
}

/// Buffer-only estimate without baseline: π_B ∇log π(a), a ~ π+.
pub fn inside_only_estimate<R: Rng + ?Sized>(ctx: &Context, policy: &Policy, buffer: &[Program], rng: &mut R) -> SparseVector {
    let pi_b = buffer_mass(ctx, policy, buffer).expect("valid buffer");
    let t = policy.sample_in_buffer(ctx, buffer, rng).expect("non-empty buffer");
    policy.grad_log_prob(ctx, &t.program).expect("valid program").scaled(pi_b)
}

/// Stratified estimate with baseline b = π_B and one sample per stratum:
/// π_B(1 − π_B)∇log π(a+) − (1 − π_B)π_B ∇log π(a−). Rejection draws are
/// repeated until one lands outside the buffer.
pub fn baseline_stratified_estimate<R: Rng + ?Sized>(
    ctx: &Context,
    policy: &Policy,
    buffer: &[Program],
    rng: &mut R,
) -> SparseVector {
    let pi_b = buffer_mass(ctx, policy, buffer).expect("valid buffer");
    let c = pi_b * (1.0 - pi_b);
    let inside = policy.sample_in_buffer(ctx, buffer, rng).expect("non-empty buffer");
    let outside = loop {
        if let crate::policy::Screened::Accepted(t) = policy.rejection_sample_outside(ctx, buffer, rng) {
            break t;
        }
    };
    let mut g = policy.grad_log_prob(ctx, &inside.program).expect("valid program").scaled(c);
    g.add_scaled(&policy.grad_log_prob(ctx, &outside.program).expect("valid program"), -c);
    g
}

/// Trace covariance of MAPO (enumerated buffer, `k` on-policy draws)
/// against REINFORCE with `k` draws, the buffer being every rewarded
/// program of `inst`.
pub fn variance_comparison(
    inst: &crate::fixtures::TinyInstance,
    k: usize,
    n_trials: usize,
    seed: u64,
) -> Result<(VarianceReport, VarianceReport), AnalysisError> {
    use crate::estimators::{mapo_gradient, reinforce_gradient, BufferMode, EstimatorConfig};
    let buffer = inst.rewarded();
    let cfg = EstimatorConfig {
        alpha: 0.0,
        buffer_mode: BufferMode::Enumerate,
        n_onpolicy: k,
    };
    let mut rng = stream_rng(seed, 1);
    let mapo = estimator_variance(
        "mapo",
        |r| mapo_gradient(&inst.ctx, &inst.policy, &buffer, &cfg, r).expect("valid buffer").grad,
        n_trials,
        &mut rng,
        false,
    )?;
    let mut rng = stream_rng(seed, 2);
    let reinforce = estimator_variance(
        "reinforce",
        |r| reinforce_gradient(&inst.ctx, &inst.policy, k, crate::estimators::Baseline::None, r).grad,
        n_trials,
        &mut rng,
        false,
    )?;
    Ok((mapo, reinforce))
}

fn jitter_cell<R: Rng + ?Sized>(cell: &Cell, rng: &mut R) -> Cell {
    match cell {
        Cell::Number(x) => Cell::Number(x + rng.gen_range(1..=5) as f64 * if rng.gen() { 1.0 } else { -1.0 }),
        Cell::Date(d) => Cell::Date(Date {
            year: d.year.map(|y| y + rng.gen_range(-3..=3)),
            ..*d
        }),
        Cell::String(s) => Cell::String(s.clone()),
    }
}

/// A copy of `table` with rows shuffled, about half the numeric and date
/// cells nudged, and string columns reshuffled with probability 1/2. Kinds
/// are preserved.
pub fn perturb_table<R: Rng + ?Sized>(table: &Table, rng: &mut R) -> Table {
    let mut rows = table.rows().to_vec();
    rows.shuffle(rng);
    for c in 0..table.columns().len() {
        let mut col: Vec<Option<Cell>> = rows.iter().map(|r| r[c].clone()).collect();
        if matches!(col.iter().flatten().next(), Some(Cell::String(_))) {
            if rng.gen_bool(0.5) {
                col.shuffle(rng);
            }
        } else {
            for cell in col.iter_mut().flatten() {
                if rng.gen_bool(0.5) {
                    *cell = jitter_cell(cell, rng);
                }
            }
        }
        for (r, v) in rows.iter_mut().zip(col) {
            r[c] = v;
        }
    }
    Table::new(table.name(), table.columns().to_vec(), rows).expect("perturbation keeps the schema")
}

fn denotation(p: &Program, t: &Table) -> Option<Vec<String>> {
    denotation_strings(&execute(p, t)).map(|mut v| {
        v.sort();
        v
    })
}

/// True when `a` and `b` disagree on at least one of `n` perturbed copies.
pub fn semantically_differ(a: &Program, b: &Program, table: &Table, n: usize, seed: u64) -> bool {
    let mut rng = stream_rng(seed, 0);
    (0..n).any(|_| {
        let t = perturb_table(table, &mut rng);
        denotation(a, &t) != denotation(b, &t)
    })
}

pub const N_PERTURBATIONS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpuriousnessReport {
    pub n_examples: usize,
    pub n_correct: usize,
    pub n_spurious: usize,
    pub fraction: f64,
    pub spurious_ids: Vec<String>,
}

/// Among examples whose top beam program is rewarded, the fraction whose
/// program disagrees with the gold program on perturbed tables. Examples
/// without a gold program are skipped.
pub fn spuriousness_report(
    policy: &Policy,
    contexts: &[Arc<Context>],
    gold: &HashMap<String, Program>,
    beam_size: usize,
    seed: u64,
) -> SpuriousnessReport {
    let mut n_correct = 0;
    let mut spurious_ids = Vec::new();
    for (i, ctx) in contexts.iter().enumerate() {
        let Some(g) = gold.get(ctx.id()) else { continue };
        let Some((p, _)) = policy.beam_search(ctx, beam_size).into_iter().next() else {
            continue;
        };
        if ctx.reward(&p) != 1.0 {
            continue;
        }
        n_correct += 1;
        if semantically_differ(&p, g, &ctx.table, N_PERTURBATIONS, seed.wrapping_add(i as u64)) {
            spurious_ids.push(ctx.id().to_string());
        }
    }
    SpuriousnessReport {
        n_examples: contexts.len(),
        n_correct,
        n_spurious: spurious_ids.len(),
        fraction: if n_correct == 0 {
            0.0
        } else {
            spurious_ids.len() as f64 / n_correct as f64
        },
        spurious_ids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        assert_eq!(variance_ratio_with_baseline(1.0, 1.0, 0.5).unwrap(), 0.5);
        assert_eq!(variance_ratio_with_baseline(3.0, 7.0, 1.0).unwrap(), 0.0);
        assert_eq!(variance_ratio_with_baseline(1.0, 0.0, 0.0).unwrap(), 1.0);
        assert!(variance_ratio_with_baseline(0.0, 1.0, 0.5).is_err());
        let r = optimal_allocation_ratio(0.3, 0.49 * 2.0, 0.09 * 2.0).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert_eq!(optimal_allocation_ratio(0.5, 2.0, 2.0).unwrap(), 1.0);
        assert!((optimal_allocation_ratio(0.8, 1.0, 4.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(optimal_allocation_ratio(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn deterministic_estimator_has_zero_trace() {
        let mut rng = stream_rng(1, 0);
        let v: SparseVector = [(3u64, 1.5), (9, -2.0)].into_iter().collect();
        let r = estimator_variance("const", |_: &mut rand_chacha::ChaCha8Rng| v.clone(), 100, &mut rng, false).unwrap();
        assert!(r.trace_cov.abs() < 1e-9);
        assert_eq!(r.mean_grad.get(3), 1.5);
        assert!(estimator_variance("x", |_: &mut rand_chacha::ChaCha8Rng| v.clone(), 1, &mut rng, false).is_err());
    }

    #[test]
    fn perturbation_keeps_shape() {
        let t = crate::fixtures::olympics_table();
        let mut rng = stream_rng(4, 0);
        let p = perturb_table(&t, &mut rng);
        assert_eq!(p.n_rows(), t.n_rows());
        assert_eq!(p.columns(), t.columns());
        for c in 0..t.columns().len() {
            for r in 0..t.n_rows() {
                assert_eq!(p.cell(r, c).map(Cell::kind), t.cell(r, c).map(Cell::kind));
            }
        }
    }
}
