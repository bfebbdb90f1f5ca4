use std::cmp::Ordering;

use super::{Cursor, Policy};
use crate::dsl::{Program, Token};
use crate::env::Context;

struct Hyp {
    cur: Cursor,
    log_prob: f64,
}

/// Higher log-prob first, then lexicographic token order.
fn rank(a_lp: f64, a: &[Token], b_lp: f64, b: &[Token]) -> Ordering {
    b_lp.total_cmp(&a_lp).then_with(|| a.cmp(b))
}

impl Policy {
    /// Length-synchronised beam search. Returns up to `beam_size` complete
    /// programs with their log-probs, best first.
    pub fn beam_search(&self, ctx: &Context, beam_size: usize) -> Vec<(Program, f64)> {
        if beam_size == 0 {
            return Vec::new();
        }
        let mut live = vec![Hyp {
            cur: Cursor::new(),
            log_prob: 0.0,
        }];
        let mut done: Vec<(Vec<Token>, f64)> = Vec::new();
        while !live.is_empty() {
            let mut expanded: Vec<Hyp> = Vec::new();
            for h in &live {
                let Ok(step) = self.step(ctx, &h.cur) else { continue };
                for (t, lp) in step.tokens.iter().zip(&step.log_probs) {
                    let mut cur = h.cur.clone();
                    cur.push(t.clone());
                    expanded.push(Hyp {
                        cur,
                        log_prob: h.log_prob + lp,
                    });
                }
            }
            expanded.sort_by(|a, b| rank(a.log_prob, &a.cur.tokens, b.log_prob, &b.cur.tokens));
            expanded.truncate(beam_size);
            live.clear();
            for h in expanded {
                if h.cur.is_finished() {
                    done.push((h.cur.tokens, h.log_prob));
                } else {
                    live.push(h);
                }
            }
            done.sort_by(|a, b| rank(a.1, &a.0, b.1, &b.0));
            done.truncate(beam_size);
            // Log-probs only fall as programs grow.
            if done.len() == beam_size {
                let worst = done[beam_size - 1].1;
                live.retain(|h| h.log_prob > worst);
            }
        }
        done.into_iter().map(|(t, lp)| (Program::new(t), lp)).collect()
    }
}
