//! Parse and run a program on the olympics table, then ask the grammar
//! which tokens may follow a few prefixes.

use mapo::dsl::{execute, valid_next_tokens, Program, Token};
use mapo::fixtures::{olympics_context, olympics_table};

fn render(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
}

fn main() {
    let table = olympics_table();
    let steps = [
        "(filter_in all_rows ['1st'] r.position-str)",
        "(last v0)",
        "(hop v1 r.venue-str)",
    ];
    // Each prefix program returns its last expression, so this prints
    // the binding of v0, v1, v2 in turn.
    for n in 1..=steps.len() {
        let text = format!("{} <EOS>", steps[..n].join(" "));
        let p = Program::parse(&text).expect("well-formed");
        println!("v{} = {:?}", n - 1, execute(&p, &table));
    }

    let ctx = olympics_context();
    let full = Program::parse(&format!("{} <EOS>", steps.join(" "))).unwrap();
    println!("reward of the full program: {}", ctx.reward(&full));
    for cut in [0, 1, 2, 5] {
        let prefix = &full.tokens()[..cut];
        let next = valid_next_tokens(prefix, &ctx.table, &ctx.example.literal_pool, &ctx.grammar);
        let shown: Vec<String> = next.iter().take(6).map(|t| t.to_string()).collect();
        println!("after [{}]: {} options, e.g. {}", render(prefix), next.len(), shown.join(" "));
    }
}
