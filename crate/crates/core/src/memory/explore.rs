use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use super::buffer::MemoryBuffer;
use super::explored::{ExploredConfig, ExploredSet};
use super::fingerprint::Fingerprinter;
use super::rules::PruningRules;
use crate::dsl::Token;
use crate::env::Context;
use crate::policy::{Cursor, Policy, Trajectory};
use crate::rng::stream_rng;

#[derive(Clone, Debug, PartialEq)]
pub enum ExploreOutcome {
    Complete(Trajectory),
    DeadEnd,
}

fn render(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
}

/// One descent of systematic exploration. At every step the candidates are
/// the valid tokens whose extension is not yet fully explored (and, with
/// `rules`, whose function is triggered by the question); the policy is
/// renormalised over them. A prefix with no candidates is marked explored.
/// A finished program is marked explored and, if rewarded, buffered.
pub fn systematic_explore<R: Rng + ?Sized>(
    ctx: &Context,
    policy: &Policy,
    explored: &mut ExploredSet,
    buffer: &mut MemoryBuffer,
    rules: Option<&PruningRules>,
    rng: &mut R,
) -> ExploreOutcome {
    let mut cur = Cursor::new();
    let mut fp = Fingerprinter::new();
    if explored.contains_fp(fp.value()) {
        return ExploreOutcome::DeadEnd;
    }
    loop {
        let candidates: Vec<Token> = cur
            .valid_next(ctx)
            .into_iter()
            .filter(|t| !explored.contains_fp(fp.with(t).value()))
            .filter(|t| match (t, rules) {
                (Token::Func(f), Some(r)) => r.allows(*f, &ctx.example),
                _ => true,
            })
            .collect();
        if candidates.is_empty() {
            explored.insert_fp(fp.value(), || render(&cur.tokens));
            return ExploreOutcome::DeadEnd;
        }
        let step = policy.step_over(ctx, &cur, candidates);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = step.tokens.len() - 1;
        for (i, l) in step.log_probs.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                pick = i;
                break;
            }
        }
        let t = step.tokens[pick].clone();
        fp.push(&t);
        cur.push(t.clone());
        if t == Token::Eos {
            explored.insert_fp(fp.value(), || render(&cur.tokens));
            let program = crate::dsl::Program::new(cur.tokens);
            let log_prob = policy.log_prob(ctx, &program).unwrap_or(f64::NEG_INFINITY);
            let reward = ctx.reward(&program);
            if reward > 0.0 {
                buffer
                    .insert(ctx, program.clone())
                    .expect("reward was just checked");
            }
            return ExploreOutcome::Complete(Trajectory {
                example_id: ctx.id().to_string(),
                program,
                reward,
                log_prob,
                weight: 1.0,
                policy_version: policy.version(),
            });
        }
    }
}

/// Buffer and explored set of one example.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleMemory {
    pub buffer: MemoryBuffer,
    pub explored: ExploredSet,
}

impl ExampleMemory {
    pub fn new(ctx: &Context, explored: &ExploredConfig) -> ExampleMemory {
        ExampleMemory {
            buffer: MemoryBuffer::new(ctx.id()),
            explored: explored.build(),
        }
    }
}

/// Runs `n_attempts` descents per example, in parallel across examples.
/// Example `i` draws from stream `i` of `seed`, so the result does not
/// depend on thread count. Stops early once an example's space is spent.
pub fn warm_start(
    contexts: &[Arc<Context>],
    policy: &Policy,
    n_attempts: usize,
    rules: Option<&PruningRules>,
    explored: &ExploredConfig,
    seed: u64,
) -> Vec<ExampleMemory> {
    contexts
        .par_iter()
        .enumerate()
        .map(|(i, ctx)| {
            let mut rng = stream_rng(seed, i as u64);
            let mut mem = ExampleMemory::new(ctx, explored);
            for _ in 0..n_attempts {
                systematic_explore(ctx, policy, &mut mem.explored, &mut mem.buffer, rules, &mut rng);
                if mem.explored.contains_fp(Fingerprinter::new().value()) {
                    break;
                }
            }
            mem
        })
        .collect()
}

/// Aggregate numbers printed after a warm start.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Coverage {
    pub examples: usize,
    pub non_empty: usize,
    pub total_programs: usize,
    pub explored_sequences: u64,
}

impl Coverage {
    pub fn of(memories: &[ExampleMemory]) -> Coverage {
        Coverage {
            examples: memories.len(),
            non_empty: memories.iter().filter(|m| !m.buffer.is_empty()).count(),
            total_programs: memories.iter().map(|m| m.buffer.len()).sum(),
            explored_sequences: memories.iter().map(|m| m.explored.len()).sum(),
        }
    }

    pub fn fraction_non_empty(&self) -> f64 {
        if self.examples == 0 {
            0.0
        } else {
            self.non_empty as f64 / self.examples as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{Cell, Column, Grammar, Kind, Table};
    use crate::env::ExampleRecord;

    #[test]
    fn exhausts_a_tiny_space_then_dead_ends() {
        let table = Table::new("t", vec![Column::new("a", "a", Kind::Number)], vec![vec![Some(Cell::Number(1.0))]])
            .unwrap();
        let rec = ExampleRecord {
            id: "e".into(),
            question: "how many".into(),
            table_ref: "t".into(),
            answer: vec!["1".into()],
            pos_tags: vec![],
        };
        let ctx = Context::from_record(rec, Arc::new(table), Arc::new(Grammar::default().capped(5)));
        let n = crate::env::count_programs(&ctx, 5) as usize;
        assert!(n > 0);
        let mut mem = ExampleMemory::new(&ctx, &ExploredConfig::Exact);
        let mut rng = stream_rng(1, 0);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..n {
            match systematic_explore(&ctx, &Policy::default(), &mut mem.explored, &mut mem.buffer, None, &mut rng) {
                ExploreOutcome::Complete(t) => assert!(seen.insert(t.program)),
                ExploreOutcome::DeadEnd => {}
            }
        }
        // at most L extra descents to close every prefix
        for _ in 0..6 {
            if let ExploreOutcome::Complete(t) =
                systematic_explore(&ctx, &Policy::default(), &mut mem.explored, &mut mem.buffer, None, &mut rng)
            {
                assert!(seen.insert(t.program));
            }
        }
        assert_eq!(seen.len(), n);
        assert_eq!(
            systematic_explore(&ctx, &Policy::default(), &mut mem.explored, &mut mem.buffer, None, &mut rng),
            ExploreOutcome::DeadEnd
        );
        assert!(mem.buffer.programs().iter().all(|p| ctx.reward(p) == 1.0));
    }
}
