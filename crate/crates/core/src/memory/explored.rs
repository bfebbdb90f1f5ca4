use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use fnv::FnvBuildHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fingerprint::fingerprint_str;

#[derive(Debug, Error)]
pub enum ExploredError {
    #[error("explored-set io: {0}")]
    Io(#[from] std::io::Error),
    #[error("explored-set json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not an explored-set dump")]
    BadFormat,
}

/// How B^e is stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ExploredConfig {
    /// Hash set of fingerprints with their renderings; no false positives
    /// beyond 128-bit collisions.
    Exact,
    Bloom { capacity: u64, epsilon: f64, seed: u64 },
}

impl Default for ExploredConfig {
    fn default() -> Self {
        ExploredConfig::Bloom {
            capacity: 1_000_000,
            epsilon: 1e-4,
            seed: 0,
        }
    }
}

impl ExploredConfig {
    pub fn build(&self) -> ExploredSet {
        match *self {
            ExploredConfig::Exact => ExploredSet::Exact(ExactSet::default()),
            ExploredConfig::Bloom { capacity, epsilon, seed } => {
                ExploredSet::Bloom(BloomFilter::with_rate(capacity, epsilon, seed))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExactSet {
    items: HashMap<u128, String, FnvBuildHasher>,
}

/// Bloom filter over 128-bit fingerprints. Bits live in a sparse map of
/// 64-bit words, so a filter sized for a million sequences costs memory
/// only for the words actually touched.
#[derive(Clone, Debug, PartialEq)]
pub struct BloomFilter {
    m: u64,
    k: u32,
    seed: u64,
    words: HashMap<u64, u64, FnvBuildHasher>,
    inserted: u64,
    capacity: u64,
    warned: bool,
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

impl BloomFilter {
    /// Sized for `capacity` insertions at false-positive rate `epsilon`:
    /// m = ⌈−n ln ε / (ln 2)²⌉, k = round(m/n · ln 2).
    pub fn with_rate(capacity: u64, epsilon: f64, seed: u64) -> BloomFilter {
        let n = capacity.max(1) as f64;
        let ln2 = std::f64::consts::LN_2;
        let m = (-n * epsilon.ln() / (ln2 * ln2)).ceil().max(64.0) as u64;
        let k = ((m as f64 / n) * ln2).round().max(1.0) as u32;
        BloomFilter::with_params(m, k, seed, capacity)
    }

    pub fn with_params(m: u64, k: u32, seed: u64, capacity: u64) -> BloomFilter {
        BloomFilter {
            m,
            k,
            seed,
            words: HashMap::default(),
            inserted: 0,
            capacity,
            warned: false,
        }
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    fn indices(&self, fp: u128) -> impl Iterator<Item = u64> + '_ {
        let h1 = mix(fp as u64 ^ self.seed);
        let h2 = mix((fp >> 64) as u64 ^ self.seed.rotate_left(32)) | 1;
        (0..self.k as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % self.m)
    }

    pub fn contains(&self, fp: u128) -> bool {
        self.indices(fp)
            .all(|b| self.words.get(&(b / 64)).is_some_and(|w| w & (1 << (b % 64)) != 0))
    }

    /// Returns true when at least one bit was newly set.
    pub fn insert(&mut self, fp: u128) -> bool {
        let idx: Vec<u64> = self.indices(fp).collect();
        let mut fresh = false;
        for b in idx {
            let w = self.words.entry(b / 64).or_insert(0);
            fresh |= *w & (1 << (b % 64)) == 0;
            *w |= 1 << (b % 64);
        }
        if fresh {
            self.inserted += 1;
            if self.inserted > self.capacity && !self.warned {
                self.warned = true;
                log::warn!("explored set past its declared capacity of {}", self.capacity);
            }
        }
        fresh
    }

    /// Expected false-positive rate after `n` insertions.
    pub fn expected_fp_rate(&self, n: u64) -> f64 {
        (1.0 - (-(self.k as f64) * n as f64 / self.m as f64).exp()).powi(self.k as i32)
    }
}

/// The explored-subsequence set B^e of one example.
#[derive(Clone, Debug, PartialEq)]
pub enum ExploredSet {
    Exact(ExactSet),
    Bloom(BloomFilter),
}

impl Default for ExploredSet {
    fn default() -> Self {
        ExploredSet::Exact(ExactSet::default())
    }
}

const MAGIC: &[u8; 8] = b"MAPOBLM1";

#[derive(Serialize, Deserialize)]
struct ExactDump {
    sequences: Vec<String>,
}

impl ExploredSet {
    pub fn contains_fp(&self, fp: u128) -> bool {
        match self {
            ExploredSet::Exact(s) => s.items.contains_key(&fp),
            ExploredSet::Bloom(b) => b.contains(fp),
        }
    }

    /// Inserts by fingerprint; `rendering` is produced lazily and only
    /// kept in exact mode.
    pub fn insert_fp(&mut self, fp: u128, rendering: impl FnOnce() -> String) -> bool {
        match self {
            ExploredSet::Exact(s) => {
                if s.items.contains_key(&fp) {
                    false
                } else {
                    s.items.insert(fp, rendering());
                    true
                }
            }
            ExploredSet::Bloom(b) => b.insert(fp),
        }
    }

    pub fn insert(&mut self, rendering: &str) -> bool {
        self.insert_fp(fingerprint_str(rendering), || rendering.to_string())
    }

    pub fn contains(&self, rendering: &str) -> bool {
        self.contains_fp(fingerprint_str(rendering))
    }

    pub fn len(&self) -> u64 {
        match self {
            ExploredSet::Exact(s) => s.items.len() as u64,
            ExploredSet::Bloom(b) => b.inserted,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exact mode: JSON list of renderings, sorted. Bloom mode: magic, then
    /// little-endian m, k, seed, capacity, inserted, word count, and the
    /// non-zero (index, word) pairs in index order.
    pub fn write(&self, path: &Path) -> Result<(), ExploredError> {
        match self {
            ExploredSet::Exact(s) => {
                let mut sequences: Vec<String> = s.items.values().cloned().collect();
                sequences.sort();
                fs::write(path, serde_json::to_string(&ExactDump { sequences })?)?;
            }
            ExploredSet::Bloom(b) => {
                let mut f = fs::File::create(path)?;
                f.write_all(MAGIC)?;
                for x in [b.m, b.k as u64, b.seed, b.capacity, b.inserted, b.words.len() as u64] {
                    f.write_all(&x.to_le_bytes())?;
                }
                let mut words: Vec<(u64, u64)> = b.words.iter().map(|(&i, &w)| (i, w)).collect();
                words.sort();
                for (i, w) in words {
                    f.write_all(&i.to_le_bytes())?;
                    f.write_all(&w.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<ExploredSet, ExploredError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if !bytes.starts_with(MAGIC) {
            let dump: ExactDump = serde_json::from_slice(&bytes)?;
            let mut s = ExploredSet::Exact(ExactSet::default());
            for seq in dump.sequences {
                s.insert(&seq);
            }
            return Ok(s);
        }
        let mut it = bytes[MAGIC.len()..]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let mut next = || it.next().ok_or(ExploredError::BadFormat);
        let (m, k, seed, capacity, inserted, n) = (next()?, next()?, next()?, next()?, next()?, next()?);
        let mut b = BloomFilter::with_params(m, k as u32, seed, capacity);
        b.inserted = inserted;
        for _ in 0..n {
            let (i, w) = (next()?, next()?);
            b.words.insert(i, w);
        }
        Ok(ExploredSet::Bloom(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizing_formula() {
        let b = BloomFilter::with_rate(1_000_000, 1e-4, 0);
        // m/n = -ln(1e-4)/ln²2 ≈ 19.17, k = round(19.17·ln2) = 13
        assert_eq!(b.m(), 19_170_117);
        assert_eq!(b.k(), 13);
    }

    #[test]
    fn no_false_negatives_and_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for cfg in [ExploredConfig::Exact, ExploredConfig::default()] {
            let mut s = cfg.build();
            assert!(!s.contains("( count all_rows ) <EOS>"));
            for i in 0..500 {
                assert!(s.insert(&format!("seq {i}")));
            }
            assert!(!s.insert("seq 7"));
            assert!((0..500).all(|i| s.contains(&format!("seq {i}"))));
            let p = dir.path().join("b");
            s.write(&p).unwrap();
            assert_eq!(ExploredSet::read(&p).unwrap(), s);
        }
    }
}
