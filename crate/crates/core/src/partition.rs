//! Hard partitions of `n` objects into `K` labelled clusters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label assignment of `n` objects to clusters `0..K` with cached sizes.
///
/// A partition is *compact* when every cluster in `0..K` is non-empty.
/// Optimizers keep partitions compact at all times; [`Partition::compact`]
/// is available for partitions built by hand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Builds a partition with `k` clusters; some may be empty.
    pub fn with_k(labels: Vec<usize>, k: usize) -> Result<Self> {
        let mut sizes = vec![0; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::InvalidCluster { index: l, k });
            }
            sizes[l] += 1;
        }
        Ok(Partition { labels, sizes })
    }

    /// Builds a compact partition from arbitrary labels, dropping unused ones.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        let p = Self::with_k(labels, k).expect("k bounds every label");
        p.compact()
    }

    /// All objects in one cluster.
    pub fn single(n: usize) -> Self {
        Partition {
            labels: vec![0; n],
            sizes: if n == 0 { vec![] } else { vec![n] },
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            labels: (0..n).collect(),
            sizes: vec![1; n],
        }
    }

    #[inline]
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_compact(&self) -> bool {
        self.sizes.iter().all(|&s| s > 0)
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    /// Drops empty clusters, shifting the remaining indices down so that
    /// their relative order is kept.
    pub fn compact(mut self) -> Self {
        if self.is_compact() {
            return self;
        }
        let mut remap = vec![usize::MAX; self.k()];
        let mut next = 0;
        for (k, &s) in self.sizes.iter().enumerate() {
            if s > 0 {
                remap[k] = next;
                next += 1;
            }
        }
        for l in &mut self.labels {
            *l = remap[*l];
        }
        self.sizes.retain(|&s| s > 0);
        self
    }

    /// Clusters as member lists, in label order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Moves object `i` to cluster `to`; the source cluster may become empty.
    pub(crate) fn move_object(&mut self, i: usize, to: usize) {
        let from = self.labels[i];
        self.sizes[from] -= 1;
        self.sizes[to] += 1;
        self.labels[i] = to;
    }

    /// Removes the (empty) cluster `k`, shifting higher labels down by one.
    pub(crate) fn remove_empty(&mut self, k: usize) {
        debug_assert_eq!(self.sizes[k], 0);
        self.sizes.remove(k);
        for l in &mut self.labels {
            if *l > k {
                *l -= 1;
            }
        }
    }

    /// Fuses cluster `h` into `g` and removes `h`.
    pub(crate) fn merge(&mut self, g: usize, h: usize) {
        debug_assert_ne!(g, h);
        for l in &mut self.labels {
            if *l == h {
                *l = g;
            }
        }
        self.sizes[g] += self.sizes[h];
        self.sizes[h] = 0;
        self.remove_empty(h);
    }

    /// Appends a new empty cluster and returns its index.
    pub(crate) fn push_cluster(&mut self) -> usize {
        self.sizes.push(0);
        self.sizes.len() - 1
    }

    /// True when every cluster of `self` lies inside a single cluster of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.n() != coarser.n() {
            return false;
        }
        let mut parent = vec![usize::MAX; self.k()];
        for (&a, &b) in self.labels.iter().zip(&coarser.labels) {
            if parent[a] == usize::MAX {
                parent[a] = b;
            } else if parent[a] != b {
                return false;
            }
        }
        true
    }

    /// Equality up to a permutation of cluster labels.
    pub fn same_clustering(&self, other: &Partition) -> bool {
        self.k() == other.k() && self.refines(other) && other.refines(self)
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        let p = Partition::with_k(labels, k)?;
        if !p.is_compact() {
            return Err(Error::data("labels must use every cluster index in 0..K"));
        }
        Ok(p)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}

/// Adjusted Rand index between two partitions of the same objects.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::LengthMismatch {
            left: a.n(),
            right: b.n(),
        });
    }
    let n = a.n();
    let (ka, kb) = (a.k(), b.k());
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.labels.iter().zip(&b.labels) {
        table[x * kb + y] += 1;
    }
    let choose2 = |m: u64| (m * m.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().map(|&m| choose2(m)).sum();
    let sum_a: f64 = a.sizes.iter().map(|&m| choose2(m as u64)).sum();
    let sum_b: f64 = b.sizes.iter().map(|&m| choose2(m as u64)).sum();
    let total = choose2(n as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        // Both partitions are trivial (all-in-one or all-singletons) in the
        // same way, or one is all-in-one and the other all-singletons.
        return Ok(if a.same_clustering(b) { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(labels: &[usize]) -> Partition {
        Partition::from_labels(labels.to_vec())
    }

    #[test]
    fn compact_drops_empty_cluster() {
        let q = Partition::with_k(vec![0, 2, 2], 3).unwrap().compact();
        assert_eq!(q.labels(), &[0, 1, 1]);
        assert_eq!(q.k(), 2);
        assert_eq!(q.sizes(), &[1, 2]);
    }

    #[test]
    fn compact_single_used_label() {
        let q = Partition::with_k(vec![1, 1, 1], 2).unwrap().compact();
        assert_eq!(q.labels(), &[0, 0, 0]);
        assert_eq!(q.k(), 1);
    }

    #[test]
    fn compact_is_identity_on_compact_input() {
        let q = Partition::with_k(vec![1, 0, 2, 0], 3).unwrap();
        assert_eq!(q.clone().compact(), q);
    }

    #[test]
    fn with_k_rejects_out_of_range_label() {
        assert!(matches!(
            Partition::with_k(vec![0, 3], 2),
            Err(Error::InvalidCluster { index: 3, k: 2 })
        ));
    }

    #[test]
    fn sizes_match_labels() {
        let q = p(&[0, 1, 1, 2, 2, 2]);
        assert_eq!(q.sizes(), &[1, 2, 3]);
        assert_eq!(q.sizes().iter().sum::<usize>(), q.n());
    }

    #[test]
    fn merge_shifts_labels() {
        let mut q = p(&[0, 1, 2, 2]);
        q.merge(2, 0);
        assert_eq!(q.labels(), &[1, 0, 1, 1]);
        assert_eq!(q.sizes(), &[1, 3]);
    }

    #[test]
    fn ari_identical_and_permuted() {
        let a = p(&[0, 0, 1, 1, 2, 2]);
        let b = p(&[2, 2, 0, 0, 1, 1]);
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert!((adjusted_rand_index(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ari_one_cluster_vs_singletons_is_zero() {
        let a = Partition::single(4);
        let b = Partition::singletons(4);
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn ari_known_value() {
        // Contingency [[2,1,0],[0,1,2]]: index 2, row pairs 6, column pairs 3,
        // total 15, expected 18/15, max 4.5 => 0.8 / 3.3 = 8/33.
        let a = p(&[0, 0, 0, 1, 1, 1]);
        let b = p(&[0, 0, 1, 1, 2, 2]);
        assert!((adjusted_rand_index(&a, &b).unwrap() - 8.0 / 33.0).abs() < 1e-12);
        // Contingency [[2,0],[1,1]]: index 1 equals its expectation 2·3/6.
        let a = p(&[0, 0, 1, 1]);
        let b = p(&[0, 0, 0, 1]);
        assert!(adjusted_rand_index(&a, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ari_length_mismatch() {
        assert!(adjusted_rand_index(&p(&[0, 1]), &p(&[0])).is_err());
    }

    #[test]
    fn refinement() {
        let fine = p(&[0, 1, 2, 2]);
        let coarse = p(&[0, 0, 1, 1]);
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
    }

    #[test]
    fn serde_round_trip_and_rejects_gaps() {
        let q = p(&[0, 1, 1, 0]);
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, "[0,1,1,0]");
        let back: Partition = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<Partition>("[0,2]").is_err());
    }
}
