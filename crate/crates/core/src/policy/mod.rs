//! Autoregressive log-linear policy over program tokens.

mod beam;
pub mod features;
mod vector;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use fnv::FnvBuildHasher;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{DecodeState, Function, Program, Token};
use crate::env::Context;

pub use features::{featurize, FeatureConfig, Features};
pub use vector::SparseVector;

pub type Params = HashMap<u64, f64, FnvBuildHasher>;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("no valid continuation after {0} tokens")]
    DeadEndPrefix(usize),
    #[error("token {token} is not valid at position {position}")]
    InvalidProgram { position: usize, token: String },
    #[error("program is incomplete")]
    Incomplete,
    #[error("memory buffer is empty")]
    EmptyBuffer,
    #[error("checkpoint feature config does not match (found {found:#x}, expected {expected:#x})")]
    ConfigMismatch { found: u64, expected: u64 },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Decoding position: the grammar state plus the bits of history the
/// feature templates look at.
#[derive(Clone, Debug, Default)]
pub struct Cursor {
    pub state: DecodeState,
    pub prev: Option<Token>,
    pub last_func: Option<Function>,
    pub tokens: Vec<Token>,
}

impl Cursor {
    pub fn new() -> Cursor {
        Cursor::default()
    }

    /// Pushes a token the caller already knows to be valid.
    pub fn push(&mut self, t: Token) {
        if t == Token::Close {
            self.last_func = self.state.current_function();
        }
        self.state.push(t.clone());
        self.prev = Some(t.clone());
        self.tokens.push(t);
    }

    pub fn valid_next(&self, ctx: &Context) -> Vec<Token> {
        self.state.valid_next(&ctx.scope())
    }

    pub fn is_finished(&self) -> bool {
        self.state.is_finished()
    }
}

/// A scored decision point: candidates, their features and log-probs.
#[derive(Clone, Debug)]
pub struct Step {
    pub tokens: Vec<Token>,
    pub features: Vec<Features>,
    pub log_probs: Vec<f64>,
}

impl Step {
    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    /// Index drawn by inverse-CDF from one uniform.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, l) in self.log_probs.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                return i;
            }
        }
        self.log_probs.len() - 1
    }
}

/// A sampled or scored program, as exchanged between actors and learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub example_id: String,
    pub program: Program,
    pub reward: f64,
    pub log_prob: f64,
    pub weight: f64,
    pub policy_version: u64,
}

/// Result of one on-policy draw screened against the buffer.
#[derive(Clone, Debug, PartialEq)]
pub enum Screened {
    Accepted(Trajectory),
    Rejected(Trajectory),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    params: Params,
    config: FeatureConfig,
    version: u64,
}

impl Default for Policy {
    fn default() -> Self {
        Policy::new(FeatureConfig::default())
    }
}

fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
    let lz = m + z.ln();
    scores.iter().map(|s| s - lz).collect()
}

/// log Σ exp(xs), stable.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Policy {
    /// Zero parameters: the uniform policy over valid tokens.
    pub fn new(config: FeatureConfig) -> Policy {
        Policy {
            params: Params::default(),
            config,
            version: 0,
        }
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn param(&self, id: u64) -> f64 {
        self.params.get(&id).copied().unwrap_or(0.0)
    }

    /// Applies an in-place parameter update and bumps the version.
    pub fn update(&mut self, f: impl FnOnce(&mut Params)) {
        f(&mut self.params);
        self.params.retain(|_, w| *w != 0.0);
        self.version += 1;
    }

    pub fn set_param(&mut self, id: u64, w: f64) {
        self.update(|p| {
            p.insert(id, w);
        });
    }

    /// θ += c·v.
    pub fn add_scaled(&mut self, v: &SparseVector, c: f64) {
        self.update(|p| {
            for (k, x) in v.iter() {
                *p.entry(k).or_insert(0.0) += c * x;
            }
        });
    }

    pub fn score(&self, f: &Features) -> f64 {
        f.iter().map(|(k, v)| self.param(*k) * v).sum()
    }

    /// Scores `candidates` at `cur` and normalises over them only.
    pub fn step_over(&self, ctx: &Context, cur: &Cursor, candidates: Vec<Token>) -> Step {
        let features: Vec<Features> = candidates
            .iter()
            .map(|t| featurize(&self.config, ctx, cur, t))
            .collect();
        let scores: Vec<f64> = features.iter().map(|f| self.score(f)).collect();
        Step {
            tokens: candidates,
            features,
            log_probs: log_softmax(&scores),
        }
    }

    /// The full per-step distribution over the valid set.
    pub fn step(&self, ctx: &Context, cur: &Cursor) -> Result<Step, PolicyError> {
        let valid = cur.valid_next(ctx);
        if valid.is_empty() {
            return Err(PolicyError::DeadEndPrefix(cur.state.len()));
        }
        Ok(self.step_over(ctx, cur, valid))
    }

    /// π(· | prefix) as (token, probability) pairs in oracle order.
    pub fn token_distribution(&self, ctx: &Context, prefix: &[Token]) -> Result<Vec<(Token, f64)>, PolicyError> {
        let cur = self.replay(ctx, prefix)?;
        let step = self.step(ctx, &cur)?;
        let probs = step.probs();
        Ok(step.tokens.into_iter().zip(probs).collect())
    }

    fn replay(&self, ctx: &Context, prefix: &[Token]) -> Result<Cursor, PolicyError> {
        let scope = ctx.scope();
        let mut cur = Cursor::new();
        for (i, t) in prefix.iter().enumerate() {
            if !cur.state.valid_next(&scope).contains(t) {
                return Err(PolicyError::InvalidProgram {
                    position: i,
                    token: t.to_string(),
                });
            }
            cur.push(t.clone());
        }
        Ok(cur)
    }

    /// Walks a complete program, returning log π and, on request, its
    /// gradient Σ_t [φ(a_t) − E_π φ].
    fn walk(&self, ctx: &Context, program: &Program, want_grad: bool) -> Result<(f64, SparseVector), PolicyError> {
        if !program.is_complete() {
            return Err(PolicyError::Incomplete);
        }
        let mut cur = Cursor::new();
        let mut lp = 0.0;
        let mut grad = SparseVector::new();
        for (i, t) in program.tokens().iter().enumerate() {
            let step = match self.step(ctx, &cur) {
                Ok(s) => s,
                Err(_) => {
                    return Err(PolicyError::InvalidProgram {
                        position: i,
                        token: t.to_string(),
                    })
                }
            };
            let Some(j) = step.tokens.iter().position(|c| c == t) else {
                return Err(PolicyError::InvalidProgram {
                    position: i,
                    token: t.to_string(),
                });
            };
            lp += step.log_probs[j];
            if want_grad && step.tokens.len() > 1 {
                for (k, v) in &step.features[j] {
                    grad.add(*k, *v);
                }
                for (f, l) in step.features.iter().zip(&step.log_probs) {
                    let p = l.exp();
                    for (k, v) in f {
                        grad.add(*k, -p * v);
                    }
                }
            }
            cur.push(t.clone());
        }
        Ok((lp, grad))
    }

    pub fn log_prob(&self, ctx: &Context, program: &Program) -> Result<f64, PolicyError> {
        self.walk(ctx, program, false).map(|(lp, _)| lp)
    }

    pub fn grad_log_prob(&self, ctx: &Context, program: &Program) -> Result<SparseVector, PolicyError> {
        self.walk(ctx, program, true).map(|(_, g)| g)
    }

    pub fn log_prob_and_grad(&self, ctx: &Context, program: &Program) -> Result<(f64, SparseVector), PolicyError> {
        self.walk(ctx, program, true)
    }

    fn trajectory(&self, ctx: &Context, program: Program, log_prob: f64) -> Trajectory {
        Trajectory {
            example_id: ctx.id().to_string(),
            reward: ctx.reward(&program),
            program,
            log_prob,
            weight: 1.0,
            policy_version: self.version,
        }
    }

    /// Ancestral sample from the unconstrained policy.
    pub fn sample<R: Rng + ?Sized>(&self, ctx: &Context, rng: &mut R) -> Trajectory {
        let mut cur = Cursor::new();
        let mut lp = 0.0;
        while !cur.is_finished() {
            let step = self
                .step(ctx, &cur)
                .expect("the grammar keeps every reachable prefix completable");
            let i = step.draw(rng);
            lp += step.log_probs[i];
            cur.push(step.tokens[i].clone());
        }
        self.trajectory(ctx, Program::new(cur.tokens), lp)
    }

    /// Draws a ∈ B with probability π(a) / π_B.
    pub fn sample_in_buffer<R: Rng + ?Sized>(
        &self,
        ctx: &Context,
        buffer: &[Program],
        rng: &mut R,
    ) -> Result<Trajectory, PolicyError> {
        if buffer.is_empty() {
            return Err(PolicyError::EmptyBuffer);
        }
        let lps: Vec<f64> = buffer
            .iter()
            .map(|p| self.log_prob(ctx, p))
            .collect::<Result<_, _>>()?;
        Ok(self.sample_in_scored_buffer(ctx, buffer, &lps, rng))
    }

    /// [`Policy::sample_in_buffer`] with the members' log-probs already
    /// computed under this policy.
    pub fn sample_in_scored_buffer<R: Rng + ?Sized>(
        &self,
        ctx: &Context,
        buffer: &[Program],
        log_probs: &[f64],
        rng: &mut R,
    ) -> Trajectory {
        let step = Step {
            tokens: Vec::new(),
            features: Vec::new(),
            log_probs: log_softmax(log_probs),
        };
        let i = step.draw(rng);
        self.trajectory(ctx, buffer[i].clone(), log_probs[i])
    }

    /// One on-policy draw; rejected when it lands in the buffer.
    pub fn rejection_sample_outside<R: Rng + ?Sized>(&self, ctx: &Context, buffer: &[Program], rng: &mut R) -> Screened {
        let t = self.sample(ctx, rng);
        if buffer.contains(&t.program) {
            Screened::Rejected(t)
        } else {
            Screened::Accepted(t)
        }
    }

    /// Writes a JSON checkpoint; params are sorted by id.
    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut params: Vec<(u64, f64)> = self.params.iter().map(|(&k, &v)| (k, v)).collect();
        params.sort_by_key(|p| p.0);
        let ck = CheckpointRef {
            version: self.version,
            feature_config: &self.config,
            config_fingerprint: self.config.fingerprint(),
            params,
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Policy, PolicyError> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        let expected = ck.feature_config.fingerprint();
        if ck.config_fingerprint != expected {
            return Err(PolicyError::ConfigMismatch {
                found: ck.config_fingerprint,
                expected,
            });
        }
        Ok(Policy {
            params: ck.params.into_iter().collect(),
            config: ck.feature_config,
            version: ck.version,
        })
    }

    pub fn load(path: &Path) -> Result<Policy, PolicyError> {
        Policy::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    version: u64,
    feature_config: &'a FeatureConfig,
    config_fingerprint: u64,
    params: Vec<(u64, f64)>,
}

#[derive(Deserialize)]
struct Checkpoint {
    version: u64,
    feature_config: FeatureConfig,
    config_fingerprint: u64,
    params: Vec<(u64, f64)>,
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fixtures::olympics_context;

    #[test]
    fn zero_params_is_uniform() {
        let ctx = olympics_context();
        let d = Policy::default().token_distribution(&ctx, &[]).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0], (Token::Open, 1.0));
        let d = Policy::default().token_distribution(&ctx, &[Token::Open]).unwrap();
        for (_, p) in &d {
            assert!((p - 1.0 / d.len() as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let ctx = olympics_context();
        let mut pol = Policy::default();
        pol.set_param(features::feature_id(1, &["hop"]), 0.7);
        let a = pol.sample(&ctx, &mut ChaCha8Rng::seed_from_u64(3));
        let b = pol.sample(&ctx, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert!(a.log_prob <= 0.0);
        assert!((pol.log_prob(&ctx, &a.program).unwrap() - a.log_prob).abs() < 1e-12);
        assert_eq!(a.policy_version, 1);
    }

    #[test]
    fn invalid_program_is_reported() {
        let ctx = olympics_context();
        let p = Program::parse("(count v3) <EOS>").unwrap();
        assert!(matches!(
            Policy::default().log_prob(&ctx, &p),
            Err(PolicyError::InvalidProgram { position: 2, .. })
        ));
        assert!(matches!(
            Policy::default().sample_in_buffer(&ctx, &[], &mut ChaCha8Rng::seed_from_u64(0)),
            Err(PolicyError::EmptyBuffer)
        ));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut pol = Policy::default();
        pol.set_param(17, 0.1 + 0.2);
        pol.set_param(u64::MAX, -1e-300);
        pol.set_param(5, std::f64::consts::PI);
        let back = Policy::from_json(&pol.to_json()).unwrap();
        assert_eq!(back, pol);
        let tampered = pol.to_json().replace("\"token\":true", "\"token\":false");
        assert!(matches!(Policy::from_json(&tampered), Err(PolicyError::ConfigMismatch { .. })));
    }
}
