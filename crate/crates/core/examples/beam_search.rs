//! Beam search with an untrained policy, next to the exhaustive program
//! count for the same question.

use mapo::env::count_programs;
use mapo::fixtures::olympics_context;
use mapo::policy::Policy;

fn main() {
    let ctx = olympics_context();
    println!("question: {}", ctx.example.question);
    for max_tokens in [5, 9, 13] {
        println!("programs of at most {max_tokens} tokens: {}", count_programs(&ctx, max_tokens));
    }
    let policy = Policy::default();
    for (p, lp) in policy.beam_search(&ctx, 5) {
        println!("{lp:8.3}  reward {}  {p}", ctx.reward(&p));
    }
}
