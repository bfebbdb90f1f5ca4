//! Measured false-positive rate of the explored-set bloom filter against
//! its target, for a few sizes.

use mapo::memory::BloomFilter;
use mapo::rng::stream_rng;
use rand::Rng;

fn main() {
    for (n, eps) in [(10_000u64, 0.05), (100_000, 0.01), (100_000, 1e-3)] {
        let mut bf = BloomFilter::with_rate(n, eps, 1);
        let mut rng = stream_rng(n, 0);
        for _ in 0..n {
            bf.insert(rng.gen());
        }
        let probes = 200_000;
        let hits = (0..probes).filter(|_| bf.contains(rng.gen())).count();
        println!("n {n:>6}, target {eps:.0e}: measured {:.2e}", hits as f64 / probes as f64);
    }
}
