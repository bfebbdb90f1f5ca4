use std::collections::HashMap;

use thiserror::Error;

use super::example::Context;
use crate::dsl::grammar::ShapeKey;
use crate::dsl::{DecodeState, Grammar, Program, Scope, Token};

/// Largest program space `enumerate_programs` will materialize.
pub const MAX_ENUMERATION: u128 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("program space has {count} programs (limit {limit})")]
pub struct SpaceTooLarge {
    pub count: u128,
    pub limit: u128,
}

fn capped_grammar(ctx: &Context, max_tokens: usize) -> Grammar {
    ctx.grammar.capped(max_tokens)
}

/// Number of complete programs of at most `max_tokens` tokens.
pub fn count_programs(ctx: &Context, max_tokens: usize) -> u128 {
    let grammar = capped_grammar(ctx, max_tokens);
    let scope = Scope {
        table: &ctx.table,
        literals: &ctx.example.literal_pool,
        grammar: &grammar,
    };
    let mut memo = HashMap::new();
    count_from(&scope, DecodeState::new(), &mut memo)
}

fn count_from(scope: &Scope, state: DecodeState, memo: &mut HashMap<ShapeKey, u128>) -> u128 {
    if state.is_finished() {
        return 1;
    }
    let key = state.shape_key();
    if let Some(&n) = memo.get(&key) {
        return n;
    }
    let mut total: u128 = 0;
    for t in state.valid_next(scope) {
        let mut next = state.clone();
        next.push(t);
        total = total.saturating_add(count_from(scope, next, memo));
    }
    memo.insert(key, total);
    total
}

/// Every complete program of at most `max_tokens` tokens accepted by the
/// validity oracle, with its reward, in lexicographic token order.
pub fn enumerate_programs(ctx: &Context, max_tokens: usize) -> Result<Vec<(Program, f64)>, SpaceTooLarge> {
    let count = count_programs(ctx, max_tokens);
    if count > MAX_ENUMERATION {
        return Err(SpaceTooLarge {
            count,
            limit: MAX_ENUMERATION,
        });
    }
    let grammar = capped_grammar(ctx, max_tokens);
    let scope = Scope {
        table: &ctx.table,
        literals: &ctx.example.literal_pool,
        grammar: &grammar,
    };
    let mut programs = Vec::with_capacity(count as usize);
    let mut prefix = Vec::new();
    walk(&scope, &DecodeState::new(), &mut prefix, &mut programs);
    programs.sort();
    Ok(programs
        .into_iter()
        .map(|p| {
            let r = ctx.reward(&p);
            (p, r)
        })
        .collect())
}

fn walk(scope: &Scope, state: &DecodeState, prefix: &mut Vec<Token>, out: &mut Vec<Program>) {
    if state.is_finished() {
        out.push(Program::new(prefix.clone()));
        return;
    }
    for t in state.valid_next(scope) {
        let mut next = state.clone();
        next.push(t.clone());
        prefix.push(t);
        walk(scope, &next, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::olympics_context;

    #[test]
    fn too_short_for_any_program() {
        let ctx = olympics_context();
        assert!(enumerate_programs(&ctx, 1).unwrap().is_empty());
        assert!(enumerate_programs(&ctx, 4).unwrap().is_empty());
        let five = enumerate_programs(&ctx, 5).unwrap();
        // (count all_rows) (first all_rows) (last all_rows)
        assert_eq!(five.len(), 3);
    }

    #[test]
    fn count_matches_enumeration_and_is_duplicate_free() {
        let ctx = olympics_context();
        let progs = enumerate_programs(&ctx, 9).unwrap();
        assert_eq!(progs.len() as u128, count_programs(&ctx, 9));
        let mut seen = std::collections::HashSet::new();
        assert!(progs.iter().all(|(p, _)| seen.insert(p.clone())));
        assert!(progs.windows(2).all(|w| w[0].0 < w[1].0));
    }
}
