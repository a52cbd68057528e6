//! Greedy swap and merge local search.

use rand::seq::SliceRandom;
use rand::Rng;

use super::SearchState;
use crate::models::ObservationModel;

/// Moves with a total gain at or below this are not applied.
pub const IMPROVEMENT_EPS: f64 = 1e-9;

pub const MAX_SWAP_EPOCHS: usize = 50;

/// One pass over all objects in random order. Each object moves to the
/// existing cluster with the largest strictly positive ICL gain (ties go to
/// the lowest index). Returns whether any object moved.
pub fn swap_epoch<M: ObservationModel, R: Rng + ?Sized>(model: &M, state: &mut SearchState<M>, rng: &mut R) -> bool {
    let n = state.partition().n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut obs = Vec::new();
    let mut improved = false;
    for i in order {
        let k = state.k();
        if k < 2 {
            break;
        }
        obs.resize(k, 0.0);
        let from = state.partition().label(i);
        model.swap_deltas(state.stats(), state.partition().labels(), i, &mut obs);
        let mut best = IMPROVEMENT_EPS;
        let mut target = None;
        for (h, &d) in obs.iter().enumerate() {
            if h == from {
                continue;
            }
            let gain = d + state.swap_partition_gain(from, h);
            if gain > best {
                best = gain;
                target = Some(h);
            }
        }
        if let Some(h) = target {
            state.apply_swap_with(model, i, from, h, obs[h]);
            improved = true;
        }
    }
    improved
}

/// Repeats swap epochs until none improves or `max_epochs` is reached.
/// Returns whether anything moved.
pub fn greedy_swap<M: ObservationModel, R: Rng + ?Sized>(
    model: &M,
    state: &mut SearchState<M>,
    rng: &mut R,
    max_epochs: usize,
) -> bool {
    let mut any = false;
    for _ in 0..max_epochs {
        if !swap_epoch(model, state, rng) {
            break;
        }
        any = true;
    }
    any
}

/// Parent clusters of each cluster of a crossover child, per parent.
///
/// Two clusters may merge when they share a parent cluster in either parent.
/// Merged clusters inherit the union of their parents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeScope {
    first: Vec<Vec<usize>>,
    second: Vec<Vec<usize>>,
}

impl MergeScope {
    pub fn new(first: &[usize], second: &[usize]) -> Self {
        MergeScope {
            first: first.iter().map(|&a| vec![a]).collect(),
            second: second.iter().map(|&b| vec![b]).collect(),
        }
    }

    pub fn allows(&self, g: usize, h: usize) -> bool {
        let shares = |a: &[usize], b: &[usize]| a.iter().any(|x| b.contains(x));
        shares(&self.first[g], &self.first[h]) || shares(&self.second[g], &self.second[h])
    }

    fn merge(&mut self, g: usize, h: usize) {
        for tags in [&mut self.first, &mut self.second] {
            let moved = tags.remove(h);
            let g = if g > h { g - 1 } else { g };
            for t in moved {
                if !tags[g].contains(&t) {
                    tags[g].push(t);
                }
            }
        }
    }
}

/// Best allowed merge whose gain exceeds `floor`, as `(g, h, obs_delta)`
/// with `g < h`; ties go to the lexicographically smallest pair.
fn best_merge<M: ObservationModel>(
    model: &M,
    state: &SearchState<M>,
    scope: Option<&MergeScope>,
    floor: f64,
) -> Option<(usize, usize, f64)> {
    let k = state.k();
    let mut best = floor;
    let mut pick = None;
    for g in 0..k {
        for h in g + 1..k {
            if scope.is_some_and(|s| !s.allows(g, h)) {
                continue;
            }
            let obs = model.delta_merge(state.stats(), g, h);
            let gain = obs + state.merge_partition_gain(g, h);
            if gain > best {
                best = gain;
                pick = Some((g, h, obs));
            }
        }
    }
    pick
}

/// Applies the best strictly improving merge until none remains.
/// Returns whether anything merged.
pub fn greedy_merge<M: ObservationModel>(model: &M, state: &mut SearchState<M>, mut scope: Option<MergeScope>) -> bool {
    let mut any = false;
    while state.k() >= 2 {
        let Some((g, h, obs)) = best_merge(model, state, scope.as_ref(), IMPROVEMENT_EPS) else {
            break;
        };
        state.apply_merge_with(model, g, h, obs);
        if let Some(s) = scope.as_mut() {
            s.merge(g, h);
        }
        any = true;
    }
    any
}

/// Applies the best merges, improving or not, until at most `k_max` clusters remain.
pub fn merge_down_to<M: ObservationModel>(model: &M, state: &mut SearchState<M>, k_max: usize) {
    while state.k() > k_max.max(1) {
        let (g, h, obs) = best_merge(model, state, None, f64::NEG_INFINITY).unwrap_or_else(|| {
            // Every gain is NaN; fall back to the first pair.
            (0, 1, model.delta_merge(state.stats(), 0, 1))
        });
        state.apply_merge_with(model, g, h, obs);
    }
}

/// Whether no single swap or merge improves the ICL by more than `tol`.
pub fn is_local_optimum<M: ObservationModel>(model: &M, state: &SearchState<M>, tol: f64) -> bool {
    let k = state.k();
    let labels = state.partition().labels();
    for (i, &from) in labels.iter().enumerate() {
        for h in 0..k {
            if h != from && state.swap_gain_unchecked(model, i, from, h) > tol {
                return false;
            }
        }
    }
    for g in 0..k {
        for h in g + 1..k {
            if state.merge_gain_unchecked(model, g, h) > tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Graph;
    use crate::models::{SbmModel, SbmPrior};
    use crate::partition::Partition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two dense blocks of `half` nodes with a few cross edges.
    fn two_blocks(half: usize, rng: &mut ChaCha8Rng) -> SbmModel {
        let n = 2 * half;
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = if (i < half) == (j < half) { 0.6 } else { 0.05 };
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let (g, _) = Graph::from_edges(n, edges, false).unwrap();
        SbmModel::new(SbmPrior { a0: 1.0, b0: 1.0, directed: false }, g).unwrap()
    }

    fn truth(half: usize) -> Partition {
        Partition::from_labels((0..2 * half).map(|i| usize::from(i >= half)).collect())
    }

    #[test]
    fn fixed_point_is_left_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = two_blocks(15, &mut rng);
        let mut s = SearchState::new(&m, truth(15), 1.0).unwrap();
        greedy_swap(&m, &mut s, &mut rng, MAX_SWAP_EPOCHS);
        let snapshot = s.partition().clone();
        let icl = s.icl().total;
        assert!(!swap_epoch(&m, &mut s, &mut rng));
        assert_eq!(s.partition(), &snapshot);
        assert_eq!(s.icl().total, icl);
    }

    #[test]
    fn mislabeled_node_returns_in_one_epoch() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = two_blocks(15, &mut rng);
        let mut labels = truth(15).into_labels();
        labels[3] = 1;
        let mut s = SearchState::new(&m, Partition::from_labels(labels), 1.0).unwrap();
        // The correcting move is the only improving one.
        for i in 0..30 {
            let from = s.partition().label(i);
            let gain = s.swap_gain(&m, i, 1 - from).unwrap();
            assert_eq!(gain > 0.0, i == 3, "node {i}: {gain}");
        }
        assert!(swap_epoch(&m, &mut s, &mut rng));
        assert_eq!(s.partition().label(3), 0);
        let inc = s.icl().total;
        s.refresh(&m).unwrap();
        assert!((s.icl().total - inc).abs() < 1e-8);
    }

    #[test]
    fn greedy_swap_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = two_blocks(12, &mut rng);
        for _ in 0..100 {
            let p = Partition::from_labels((0..24).map(|_| rng.random_range(0..5)).collect());
            let mut s = SearchState::new(&m, p, 1.0).unwrap();
            let mut last = s.icl().total;
            for _ in 0..MAX_SWAP_EPOCHS {
                let moved = swap_epoch(&m, &mut s, &mut rng);
                assert!(s.icl().total >= last - 1e-9);
                assert!(s.partition().is_compact());
                last = s.icl().total;
                if !moved {
                    break;
                }
            }
        }
    }

    #[test]
    fn identical_blocks_are_merged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = two_blocks(15, &mut rng);
        // Block 0 split in two halves with identical connectivity.
        let labels = (0..30).map(|i| if i < 7 { 0 } else if i < 15 { 2 } else { 1 }).collect();
        let mut s = SearchState::new(&m, Partition::from_labels(labels), 1.0).unwrap();
        assert!(s.merge_gain(&m, 0, 2).unwrap() > 0.0);
        let before = s.icl().total;
        assert!(greedy_merge(&m, &mut s, None));
        assert!(s.icl().total >= before);
        assert!(s.partition().same_clustering(&truth(15)));
    }

    #[test]
    fn single_cluster_merge_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = two_blocks(5, &mut rng);
        let mut s = SearchState::new(&m, Partition::single(10), 1.0).unwrap();
        assert!(!greedy_merge(&m, &mut s, None));
        assert_eq!(s.k(), 1);
    }

    #[test]
    fn scope_restricts_candidates() {
        let scope = MergeScope::new(&[0, 0, 1], &[0, 1, 2]);
        assert!(scope.allows(0, 1));
        assert!(!scope.allows(0, 2));
        assert!(!scope.allows(1, 2));
        let mut s2 = scope.clone();
        s2.merge(0, 1);
        assert_eq!(s2.first, vec![vec![0], vec![1]]);
        assert_eq!(s2.second, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn merge_down_caps_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = two_blocks(10, &mut rng);
        let mut s = SearchState::new(&m, Partition::singletons(20), 1.0).unwrap();
        merge_down_to(&m, &mut s, 3);
        assert_eq!(s.k(), 3);
    }
}
