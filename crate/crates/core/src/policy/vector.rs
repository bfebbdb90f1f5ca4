use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Sparse vector keyed by 64-bit feature id. Zero entries are never stored,
/// and iteration order is by id so sums are reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: BTreeMap<u64, f64>,
}

impl SparseVector {
    pub fn new() -> SparseVector {
        SparseVector::default()
    }

    pub fn get(&self, id: u64) -> f64 {
        self.entries.get(&id).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, id: u64, v: f64) {
        if v == 0.0 {
            return;
        }
        let e = self.entries.entry(id).or_insert(0.0);
        *e += v;
        if *e == 0.0 {
            self.entries.remove(&id);
        }
    }

    pub fn add_scaled(&mut self, other: &SparseVector, c: f64) {
        if c == 0.0 {
            return;
        }
        for (&id, &v) in &other.entries {
            self.add(id, c * v);
        }
    }

    pub fn scale(&mut self, c: f64) {
        if c == 0.0 {
            self.entries.clear();
            return;
        }
        for v in self.entries.values_mut() {
            *v *= c;
        }
        self.entries.retain(|_, v| *v != 0.0);
    }

    pub fn scaled(&self, c: f64) -> SparseVector {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.iter().map(|(k, v)| v * large.get(k)).sum()
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &SparseVector) -> f64 {
        let mut d: f64 = 0.0;
        for (k, v) in self.iter() {
            d = d.max((v - other.get(k)).abs());
        }
        for (k, v) in other.iter() {
            if !self.entries.contains_key(&k) {
                d = d.max(v.abs());
            }
        }
        d
    }
}

impl FromIterator<(u64, f64)> for SparseVector {
    fn from_iter<I: IntoIterator<Item = (u64, f64)>>(iter: I) -> Self {
        let mut v = SparseVector::new();
        for (k, x) in iter {
            v.add(k, x);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_are_dropped() {
        let mut v = SparseVector::new();
        v.add(3, 1.5);
        v.add(3, -1.5);
        v.add(4, 0.0);
        assert!(v.is_empty());
        v.add(1, 2.0);
        v.scale(0.0);
        assert!(v.is_empty());
    }

    #[test]
    fn arithmetic() {
        let a: SparseVector = [(1, 1.0), (2, 2.0)].into_iter().collect();
        let b: SparseVector = [(2, 3.0), (5, 1.0)].into_iter().collect();
        assert_eq!(a.dot(&b), 6.0);
        let mut c = a.clone();
        c.add_scaled(&b, -1.0);
        assert_eq!(c.get(2), -1.0);
        assert_eq!(c.get(5), -1.0);
        assert_eq!(a.max_abs_diff(&b), 1.0);
        assert_eq!(a.norm_sq(), 5.0);
    }
}
