use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsl::Program;
use crate::env::Context;
use crate::policy::Policy;

/// Top beam program for one example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub program: Option<Program>,
    pub log_prob: Option<f64>,
    pub correct: bool,
}

pub fn predict(policy: &Policy, contexts: &[Arc<Context>], beam_size: usize) -> Vec<Prediction> {
    contexts
        .par_iter()
        .map(|ctx| {
            let top = policy.beam_search(ctx, beam_size).into_iter().next();
            let correct = top.as_ref().is_some_and(|(p, _)| ctx.reward(p) == 1.0);
            Prediction {
                id: ctx.id().to_string(),
                log_prob: top.as_ref().map(|(_, lp)| *lp),
                program: top.map(|(p, _)| p),
                correct,
            }
        })
        .collect()
}

/// Fraction of examples whose top beam program earns reward 1.
pub fn evaluate(policy: &Policy, contexts: &[Arc<Context>], beam_size: usize) -> f64 {
    if contexts.is_empty() {
        log::warn!("evaluating on an empty dataset; accuracy defined as 0");
        return 0.0;
    }
    let preds = predict(policy, contexts, beam_size);
    preds.iter().filter(|p| p.correct).count() as f64 / preds.len() as f64
}
