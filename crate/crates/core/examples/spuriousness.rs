//! Two programs that both answer the olympics question, told apart by
//! running them on perturbed copies of the table.

use mapo::analysis::{perturb_table, semantically_differ};
use mapo::dsl::{execute, Program};
use mapo::fixtures::olympics_table;
use mapo::rng::stream_rng;

fn main() {
    let table = olympics_table();
    let gold = Program::parse("(filter_in all_rows ['1st'] r.position-str) (last v0) (hop v1 r.venue-str) <EOS>").unwrap();
    let spurious = Program::parse("(last all_rows) (previous v0) (hop v1 r.venue-str) <EOS>").unwrap();
    for p in [&gold, &spurious] {
        println!("{:?} <- {p}", execute(p, &table));
    }
    let mut rng = stream_rng(3, 0);
    for i in 0..3 {
        let t = perturb_table(&table, &mut rng);
        println!("perturbation {i}: gold {:?}, other {:?}", execute(&gold, &t), execute(&spurious, &t));
    }
    println!("semantically differ: {}", semantically_differ(&gold, &spurious, &table, 5, 0));
}
