//! Policy-gradient estimators: the enumeration oracle, REINFORCE, MAPO with
//! memory-weight clipping, and the likelihood-based baselines (MML, Hard
//! EM, IML).
//!
//! Every sampled estimator first produces a list of [`WeightedSample`]s and
//! then sums `w · R · ∇log π` through [`accumulate`]. The trainer's learner
//! uses the same function, which is what makes inline and distributed
//! gradients bitwise comparable.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::Program;
use crate::env::{enumerate_programs, Context, SpaceTooLarge};
use crate::policy::{log_sum_exp, Policy, PolicyError, Screened, SparseVector};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("memory buffer is empty")]
    EmptyBuffer,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Space(#[from] SpaceTooLarge),
}

/// How the inside-buffer expectation is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferMode {
    /// Exact sum over buffer members.
    Enumerate,
    /// Average over n draws from π restricted to the buffer.
    Sample(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub alpha: f64,
    pub buffer_mode: BufferMode,
    pub n_onpolicy: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            alpha: 0.1,
            buffer_mode: BufferMode::Enumerate,
            n_onpolicy: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub pi_b: f64,
    pub clipped: bool,
    pub n_buffer_samples: usize,
    pub n_onpolicy_kept: usize,
    /// Mean reward of all on-policy draws, kept or rejected.
    pub onpolicy_reward: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradientEstimate {
    pub grad: SparseVector,
    pub diagnostics: Diagnostics,
}

/// One term of a gradient estimate: contributes `weight · reward · ∇log π`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub program: Program,
    pub reward: f64,
    pub weight: f64,
    /// log π(a) under the policy that produced the sample.
    pub log_prob: f64,
}

/// max(π_B, α) for a non-empty buffer, 0 for an empty one.
pub fn clip_weight(pi_b: f64, alpha: f64) -> f64 {
    pi_b.max(alpha)
}

fn memory_weight(pi_b: f64, alpha: f64, buffer_len: usize) -> f64 {
    if buffer_len == 0 {
        0.0
    } else {
        clip_weight(pi_b, alpha)
    }
}

/// Σ w · R · ∇log π(a) under `policy`, in sample order. Terms with zero
/// weight or reward are skipped.
pub fn accumulate(ctx: &Context, policy: &Policy, samples: &[WeightedSample]) -> Result<SparseVector, PolicyError> {
    let mut g = SparseVector::new();
    for s in samples {
        let c = s.weight * s.reward;
        if c == 0.0 {
            continue;
        }
        g.add_scaled(&policy.grad_log_prob(ctx, &s.program)?, c);
    }
    Ok(g)
}

/// Log-probs of buffer members and log π_B.
pub fn buffer_log_probs(ctx: &Context, policy: &Policy, buffer: &[Program]) -> Result<(Vec<f64>, f64), PolicyError> {
    let lps: Vec<f64> = buffer
        .iter()
        .map(|p| policy.log_prob(ctx, p))
        .collect::<Result<_, _>>()?;
    let lz = log_sum_exp(&lps);
    Ok((lps, lz))
}

pub fn buffer_mass(ctx: &Context, policy: &Policy, buffer: &[Program]) -> Result<f64, PolicyError> {
    if buffer.is_empty() {
        return Ok(0.0);
    }
    Ok(buffer_log_probs(ctx, policy, buffer)?.1.exp().min(1.0))
}

/// Expected reward Σ_a π(a) R(a) over the enumerable space.
pub fn exact_objective(ctx: &Context, policy: &Policy, max_tokens: usize) -> Result<f64, EstimatorError> {
    let mut total = 0.0;
    for (p, r) in enumerate_programs(ctx, max_tokens)? {
        if r != 0.0 {
            total += r * policy.log_prob(ctx, &p)?.exp();
        }
    }
    Ok(total)
}

/// Σ_a π(a) R(a) ∇log π(a) over every program of at most `max_tokens`.
pub fn exact_gradient(ctx: &Context, policy: &Policy, max_tokens: usize) -> Result<SparseVector, EstimatorError> {
    let mut g = SparseVector::new();
    for (p, r) in enumerate_programs(ctx, max_tokens)? {
        if r == 0.0 {
            continue;
        }
        let (lp, grad) = policy.log_prob_and_grad(ctx, &p)?;
        g.add_scaled(&grad, r * lp.exp());
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    None,
    BatchMean,
}

/// K on-policy samples, each weighted (R − b)/K.
pub fn reinforce_samples<R: Rng + ?Sized>(
    ctx: &Context,
    policy: &Policy,
    k: usize,
    baseline: Baseline,
    rng: &mut R,
) -> Vec<WeightedSample> {
    let draws: Vec<_> = (0..k).map(|_| policy.sample(ctx, rng)).collect();
    let b = match baseline {
        Baseline::None => 0.0,
        Baseline::BatchMean if k > 0 => draws.iter().map(|t| t.reward).sum::<f64>() / k as f64,
        Baseline::BatchMean => 0.0,
    };
    draws
        .into_iter()
        .map(|t| WeightedSample {
            program: t.program,
            reward: t.reward - b,
            weight: 1.0 / k as f64,
            log_prob: t.log_prob,
        })
        .collect()
}

pub fn reinforce_gradient<R: Rng + ?Sized>(
    ctx: &Context,
    policy: &Policy,
    k: usize,
    baseline: Baseline,
    rng: &mut R,
) -> GradientEstimate {
    let samples = reinforce_samples(ctx, policy, k, baseline, rng);
    let mean_reward = samples.iter().map(|s| ctx.reward(&s.program)).sum::<f64>() / k.max(1) as f64;
    GradientEstimate {
        grad: accumulate(ctx, policy, &samples).expect("sampled programs are valid"),
        diagnostics: Diagnostics {
            n_onpolicy_kept: samples.len(),
            onpolicy_reward: mean_reward,
            ..Diagnostics::default()
        },
    }
}

/// The weighted samples behind one MAPO estimate: inside-buffer terms with
/// total weight w+ = max(π_B, α) and kept on-policy terms with total weight
/// 1 − w+. With an empty buffer w+ = 0 and this is REINFORCE.
pub fn mapo_samples<R: Rng + ?Sized>(
    ctx: &Context,
    policy: &Policy,
    buffer: &[Program],
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<(Vec<WeightedSample>, Diagnostics), PolicyError> {
    let mut out = Vec::new();
    let mut diag = Diagnostics::default();
    let mut w_plus = 0.0;
    if !buffer.is_empty() {
        let (lps, lz) = buffer_log_probs(ctx, policy, buffer)?;
        diag.pi_b = lz.exp().min(1.0);
        w_plus = memory_weight(diag.pi_b, cfg.alpha, buffer.len());
        diag.clipped = diag.pi_b < cfg.alpha;
        match cfg.buffer_mode {
            BufferMode::Enumerate => {
                for (p, lp) in buffer.iter().zip(&lps) {
                    out.push(WeightedSample {
                        program: p.clone(),
                        reward: ctx.reward(p),
                        weight: w_plus * (lp - lz).exp(),
                        log_prob: *lp,
                    });
                }
                diag.n_buffer_samples = buffer.len();
            }
            BufferMode::Sample(n) => {
                for _ in 0..n {
                    let t = policy.sample_in_scored_buffer(ctx, buffer, &lps, rng);
                    out.push(WeightedSample {
                        program: t.program,
                        reward: t.reward,
                        weight: w_plus / n as f64,
                        log_prob: t.log_prob,
                    });
                }
                diag.n_buffer_samples = n;
            }
        }
    }
    let mut kept = Vec::new();
    let mut reward_sum = 0.0;
    for _ in 0..cfg.n_onpolicy {
        match policy.rejection_sample_outside(ctx, buffer, rng) {
            Screened::Accepted(t) => {
                reward_sum += t.reward;
                kept.push(t);
            }
            Screened::Rejected(t) => reward_sum += t.reward,
        }
    }
    diag.onpolicy_reward = reward_sum / cfg.n_onpolicy.max(1) as f64;
    diag.n_onpolicy_kept = kept.len();
    let w_minus = (1.0 - w_plus) / kept.len().max(1) as f64;
    for t in kept {
        out.push(WeightedSample {
            program: t.program,
            reward: t.reward,
            weight: w_minus,
            log_prob: t.log_prob,
        });
    }
    Ok((out, diag))
}

pub fn mapo_gradient<R: Rng + ?Sized>(
    ctx: &Context,
    policy: &Policy,
    buffer: &[Program],
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<GradientEstimate, PolicyError> {
    let (samples, diagnostics) = mapo_samples(ctx, policy, buffer, cfg, rng)?;
    Ok(GradientEstimate {
        grad: accumulate(ctx, policy, &samples)?,
        diagnostics,
    })
}

/// Buffer members weighted by π(a)/π_B: the gradient of log π_B.
pub fn mml_samples(ctx: &Context, policy: &Policy, buffer: &[Program]) -> Result<Vec<WeightedSample>, EstimatorError> {
    if buffer.is_empty() {
        return Err(EstimatorError::EmptyBuffer);
    }
    let (lps, lz) = buffer_log_probs(ctx, policy, buffer)?;
    Ok(buffer
        .iter()
        .zip(&lps)
        .map(|(p, lp)| WeightedSample {
            program: p.clone(),
            reward: 1.0,
            weight: (lp - lz).exp(),
            log_prob: *lp,
        })
        .collect())
}

/// The most probable buffer member, ties to the lexicographically smaller.
pub fn hard_em_samples(ctx: &Context, policy: &Policy, buffer: &[Program]) -> Result<Vec<WeightedSample>, EstimatorError> {
    if buffer.is_empty() {
        return Err(EstimatorError::EmptyBuffer);
    }
    let (lps, _) = buffer_log_probs(ctx, policy, buffer)?;
    let best = (0..buffer.len())
        .min_by(|&i, &j| lps[j].total_cmp(&lps[i]).then_with(|| buffer[i].cmp(&buffer[j])))
        .expect("buffer is non-empty");
    Ok(vec![WeightedSample {
        program: buffer[best].clone(),
        reward: 1.0,
        weight: 1.0,
        log_prob: lps[best],
    }])
}

/// Every buffer member with weight 1.
pub fn iml_samples(ctx: &Context, policy: &Policy, buffer: &[Program]) -> Result<Vec<WeightedSample>, EstimatorError> {
    if buffer.is_empty() {
        return Err(EstimatorError::EmptyBuffer);
    }
    let (lps, _) = buffer_log_probs(ctx, policy, buffer)?;
    Ok(buffer
        .iter()
        .zip(lps)
        .map(|(p, log_prob)| WeightedSample {
            program: p.clone(),
            reward: 1.0,
            weight: 1.0,
            log_prob,
        })
        .collect())
}

pub fn mml_gradient(ctx: &Context, policy: &Policy, buffer: &[Program]) -> Result<SparseVector, EstimatorError> {
    Ok(accumulate(ctx, policy, &mml_samples(ctx, policy, buffer)?)?)
}

pub fn hard_em_gradient(ctx: &Context, policy: &Policy, buffer: &[Program]) -> Result<SparseVector, EstimatorError> {
    Ok(accumulate(ctx, policy, &hard_em_samples(ctx, policy, buffer)?)?)
}

pub fn iml_gradient(ctx: &Context, policy: &Policy, buffer: &[Program]) -> Result<SparseVector, EstimatorError> {
    Ok(accumulate(ctx, policy, &iml_samples(ctx, policy, buffer)?)?)
}
