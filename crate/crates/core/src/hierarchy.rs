//! Nested partitions from `K*` down to one cluster, with the Dirichlet
//! concentration below which each merge pays off, and an optimal ordering
//! of the leaves of the resulting tree.
//!
//! For small `α` the partition term behaves like
//! `(K − 1) ln α − ln K + Σ ln Γ(n_k) − ln Γ(n)`, so the total gain of a merge
//! is linear in `ln α` with slope −1 and is positive exactly when
//! `ln α < ln α*` (see [`merge_threshold`]).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icl::partition_term_ln_alpha;
use crate::models::ObservationModel;
use crate::optim::SearchState;
use crate::partition::Partition;
use crate::special::ln_gamma;

/// `ln α*` of fusing clusters of sizes `n_g`, `n_h` when `k` clusters exist.
pub fn merge_threshold(delta_obs: f64, n_g: usize, n_h: usize, k: usize) -> f64 {
    let kf = k as f64;
    delta_obs + kf.ln() - (kf - 1.0).ln() + ln_gamma((n_g + n_h) as f64) - ln_gamma(n_g as f64) - ln_gamma(n_h as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    /// Number of clusters after the merge.
    pub level: usize,
    /// Fused pair in the labelling with `level + 1` clusters; `h` goes into `g`.
    pub g: usize,
    pub h: usize,
    /// Tree nodes fused: leaves are `0..K*`, step `s` creates node `K* + s`.
    pub nodes: (usize, usize),
    pub delta_obs: f64,
    pub log_alpha_threshold: f64,
    pub icl_obs_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyPath {
    pub base: Partition,
    pub base_obs: f64,
    pub steps: Vec<MergeStep>,
    /// Base clusters in display order.
    pub leaf_order: Vec<usize>,
}

impl HierarchyPath {
    pub fn k_star(&self) -> usize {
        self.base.k()
    }

    /// The partition with `k` clusters on the path.
    pub fn cut(&self, k: usize) -> Result<Partition> {
        let top = self.k_star();
        if k < 1 || k > top {
            return Err(Error::config(format!("cut level must lie in 1..={top}, got {k}")));
        }
        let mut p = self.base.clone();
        for step in &self.steps[..top - k] {
            p.merge(step.g, step.h);
        }
        Ok(p)
    }

    /// Observational term of level `k`.
    pub fn level_obs(&self, k: usize) -> Result<f64> {
        let top = self.k_star();
        if k < 1 || k > top {
            return Err(Error::config(format!("level must lie in 1..={top}, got {k}")));
        }
        Ok(if k == top { self.base_obs } else { self.steps[top - k - 1].icl_obs_after })
    }

    /// Exact ICL of level `k` under the concentration `exp(ln_alpha)`.
    pub fn level_icl(&self, k: usize, ln_alpha: f64) -> Result<f64> {
        let p = self.cut(k)?;
        Ok(self.level_obs(k)? + partition_term_ln_alpha(p.sizes(), ln_alpha))
    }

    /// `(k, lo, hi)`: the range of `ln α` where level `k` should win, from
    /// the threshold of its own next merge up to that of the merge that
    /// created it, capped at `ln_cap`. Empty ranges and level 1 (unbounded
    /// below) are left out.
    pub fn owned_intervals(&self, ln_cap: f64) -> Vec<(usize, f64, f64)> {
        let top = self.k_star();
        let mut out = Vec::new();
        for k in 2..=top {
            let lo = self.steps[top - k].log_alpha_threshold;
            let hi = if k == top { ln_cap } else { self.steps[top - k - 1].log_alpha_threshold.min(ln_cap) };
            if lo < hi {
                out.push((k, lo, hi));
            }
        }
        out
    }

    /// Tree heights `−ln α*`, made non-decreasing by a running minimum taken
    /// from the root down. Leaves sit at `min(0, lowest merge height)`.
    pub fn heights(&self) -> (f64, Vec<f64>) {
        let mut h: Vec<f64> = self.steps.iter().map(|s| -s.log_alpha_threshold).collect();
        for s in (0..h.len().saturating_sub(1)).rev() {
            h[s] = h[s].min(h[s + 1]);
        }
        let leaf = h.first().copied().unwrap_or(0.0).min(0.0);
        (leaf, h)
    }

    fn children(&self) -> Vec<(usize, usize)> {
        self.steps.iter().map(|s| s.nodes).collect()
    }

    /// Children of each internal node, ordered to follow `leaf_order`.
    fn ordered_children(&self) -> Vec<(usize, usize)> {
        let k = self.k_star();
        let mut pos = vec![0usize; k];
        for (p, &leaf) in self.leaf_order.iter().enumerate() {
            pos[leaf] = p;
        }
        let mut first = pos.clone();
        let mut out = Vec::with_capacity(self.steps.len());
        for &(a, b) in &self.children() {
            let (fa, fb) = (first[a], first[b]);
            first.push(fa.min(fb));
            out.push(if fa <= fb { (a, b) } else { (b, a) });
        }
        out
    }

    pub fn dendrogram(&self) -> Dendrogram {
        let k = self.k_star();
        let sizes = self.base.sizes();
        let (leaf_h, heights) = self.heights();
        let mut nodes: Vec<DendrogramNode> = (0..k)
            .map(|c| DendrogramNode {
                id: c,
                children: Vec::new(),
                height: leaf_h,
                size: sizes[c],
                cluster: Some(c),
            })
            .collect();
        for (s, &(a, b)) in self.ordered_children().iter().enumerate() {
            let size = nodes[a].size + nodes[b].size;
            nodes.push(DendrogramNode {
                id: k + s,
                children: vec![a, b],
                height: heights[s],
                size,
                cluster: None,
            });
        }
        Dendrogram {
            root: nodes.len().saturating_sub(1),
            leaf_order: self.leaf_order.clone(),
            nodes,
        }
    }

    /// Newick string; leaves are `C<k>` and branch lengths are height differences.
    pub fn newick(&self) -> String {
        let d = self.dendrogram();
        let mut out = String::new();
        if d.nodes.is_empty() {
            out.push(';');
            return out;
        }
        fn walk(d: &Dendrogram, v: usize, parent_h: Option<f64>, out: &mut String) {
            let node = &d.nodes[v];
            if node.children.is_empty() {
                write!(out, "C{}", node.cluster.unwrap_or(v)).unwrap();
            } else {
                out.push('(');
                for (i, &c) in node.children.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    walk(d, c, Some(node.height), out);
                }
                out.push(')');
            }
            if let Some(ph) = parent_h {
                write!(out, ":{}", ph - node.height).unwrap();
            }
        }
        walk(&d, d.root, None, &mut out);
        out.push(';');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramNode {
    pub id: usize,
    pub children: Vec<usize>,
    pub height: f64,
    pub size: usize,
    pub cluster: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub root: usize,
    pub leaf_order: Vec<usize>,
    pub nodes: Vec<DendrogramNode>,
}

/// `cost(g, h) = −ln α*(g, h)` at `K*`; the diagonal is `+∞`.
pub fn leaf_cost_matrix<M: ObservationModel>(model: &M, state: &SearchState<M>) -> Vec<Vec<f64>> {
    let k = state.k();
    let sizes = state.partition().sizes();
    let mut cost = vec![vec![f64::INFINITY; k]; k];
    for g in 0..k {
        for h in g + 1..k {
            let d = model.delta_merge(state.stats(), g, h);
            let c = -merge_threshold(d, sizes[g], sizes[h], k);
            cost[g][h] = c;
            cost[h][g] = c;
        }
    }
    cost
}

/// Greedy merge path from the state's partition down to one cluster, with
/// the leaves ordered to minimize the summed cost of adjacent leaves.
pub fn build_path<M: ObservationModel>(model: &M, state: &SearchState<M>) -> Result<HierarchyPath> {
    let top = state.k();
    let cost = leaf_cost_matrix(model, state);
    let mut s = state.clone();
    s.refresh(model)?;
    let base_obs = s.icl().obs;
    let mut node_of: Vec<usize> = (0..top).collect();
    let mut steps = Vec::with_capacity(top.saturating_sub(1));
    while s.k() >= 2 {
        let k = s.k();
        let sizes = s.partition().sizes().to_vec();
        let mut pick: Option<(usize, usize, f64, f64)> = None;
        for g in 0..k {
            for h in g + 1..k {
                let d = model.delta_merge(s.stats(), g, h);
                let t = merge_threshold(d, sizes[g], sizes[h], k);
                if pick.is_none_or(|p| t > p.3) {
                    pick = Some((g, h, d, t));
                }
            }
        }
        let (g, h, d, t) = pick.expect("k >= 2");
        s.apply_merge(model, g, h)?;
        let node = top + steps.len();
        let nodes = (node_of[g], node_of[h]);
        node_of[g] = node;
        node_of.remove(h);
        steps.push(MergeStep {
            level: k - 1,
            g,
            h,
            nodes,
            delta_obs: d,
            log_alpha_threshold: t,
            icl_obs_after: s.icl().obs,
        });
    }
    let children: Vec<(usize, usize)> = steps.iter().map(|s| s.nodes).collect();
    let leaf_order = if top >= 2 { order_leaves(top, &children, &cost)? } else { (0..top).collect() };
    Ok(HierarchyPath {
        base: state.partition().clone(),
        base_obs,
        steps,
        leaf_order,
    })
}

/// Leaves of every node of a binary tree with leaves `0..k` and internal
/// node `k + s` fusing `children[s]`.
fn node_leaves(k: usize, children: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut leaves: Vec<Vec<usize>> = (0..k).map(|c| vec![c]).collect();
    for &(a, b) in children {
        let mut l = leaves[a].clone();
        l.extend_from_slice(&leaves[b]);
        leaves.push(l);
    }
    leaves
}

/// Sum of `cost` over adjacent leaves of `order`.
pub fn order_cost(order: &[usize], cost: &[Vec<f64>]) -> f64 {
    order.windows(2).map(|w| cost[w[0]][w[1]]).sum()
}

/// Among all leaf orders compatible with the tree (every subtree flip), one
/// with minimal adjacent cost. Ties resolve to the lexicographically
/// smallest candidate.
pub fn order_leaves(k: usize, children: &[(usize, usize)], cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if children.len() != k - 1 {
        return Err(Error::domain(format!("a tree on {k} leaves has {} merges, got {}", k - 1, children.len())));
    }
    if cost.len() != k || cost.iter().any(|r| r.len() != k) {
        return Err(Error::domain(format!("cost matrix must be {k} x {k}")));
    }
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            if !cost[a][b].is_finite() {
                return Err(Error::domain(format!("cost[{a}][{b}] is not finite")));
            }
            let scale = cost[a][b].abs().max(cost[b][a].abs()).max(1.0);
            if (cost[a][b] - cost[b][a]).abs() > 1e-9 * scale {
                return Err(Error::domain("cost matrix must be symmetric"));
            }
        }
    }
    if k == 1 {
        return Ok(vec![0]);
    }
    let leaves = node_leaves(k, children);
    // best[a][b]: minimal cost of an order of the subtree rooted at lca(a, b)
    // that starts at a and ends at b. Each leaf pair has one lca, so one
    // matrix covers every subtree.
    let mut best = vec![vec![f64::INFINITY; k]; k];
    let mut via = vec![vec![(usize::MAX, usize::MAX); k]; k];
    for a in 0..k {
        best[a][a] = 0.0;
    }
    // Leaves an order of node `v` can end at, given it starts at `a`.
    let far_side = |v: usize, a: usize| -> &[usize] {
        if v < k {
            &leaves[v]
        } else {
            let (l, r) = children[v - k];
            if leaves[l].contains(&a) {
                &leaves[r]
            } else {
                &leaves[l]
            }
        }
    };
    for (s, &(l, r)) in children.iter().enumerate() {
        let _v = k + s;
        let mut right_sorted = leaves[r].clone();
        right_sorted.sort_unstable();
        let mut left_sorted = leaves[l].clone();
        left_sorted.sort_unstable();
        for &a in &left_sorted {
            let mut inner: Vec<usize> = far_side(l, a).to_vec();
            inner.sort_unstable();
            // reach[d]: cheapest way to finish the left part from a and step to d.
            let mut reach = vec![(f64::INFINITY, usize::MAX); k];
            for &d in &right_sorted {
                for &c in &inner {
                    let v = best[a][c] + cost[c][d];
                    if v < reach[d].0 {
                        reach[d] = (v, c);
                    }
                }
            }
            for &b in &right_sorted {
                let mut outer: Vec<usize> = far_side(r, b).to_vec();
                outer.sort_unstable();
                let mut top = (f64::INFINITY, usize::MAX, usize::MAX);
                for &d in &outer {
                    let v = reach[d].0 + best[d][b];
                    if v < top.0 {
                        top = (v, reach[d].1, d);
                    }
                }
                best[a][b] = top.0;
                best[b][a] = top.0;
                via[a][b] = (top.1, top.2);
            }
        }
    }
    let root = 2 * k - 2;
    let (l, r) = children[root - k];
    let mut left_sorted = leaves[l].clone();
    left_sorted.sort_unstable();
    let mut right_sorted = leaves[r].clone();
    right_sorted.sort_unstable();
    let mut candidates = Vec::new();
    let mut min = f64::INFINITY;
    for &a in &left_sorted {
        for &b in &right_sorted {
            if best[a][b] < min {
                min = best[a][b];
            }
        }
    }
    for &a in &left_sorted {
        for &b in &right_sorted {
            if best[a][b] == min {
                let order = unfold(a, b, k, children, &leaves, &via);
                let mut rev = order.clone();
                rev.reverse();
                candidates.push(order.min(rev));
            }
        }
    }
    Ok(candidates.into_iter().min().expect("non-empty tree"))
}

fn lca(a: usize, b: usize, k: usize, leaves: &[Vec<usize>]) -> usize {
    (k..leaves.len())
        .find(|&v| leaves[v].contains(&a) && leaves[v].contains(&b))
        .expect("leaves share the root")
}

/// Rebuilds the order from `a` to `b` recorded in `via`.
fn unfold(
    a: usize,
    b: usize,
    k: usize,
    children: &[(usize, usize)],
    leaves: &[Vec<usize>],
    via: &[Vec<(usize, usize)>],
) -> Vec<usize> {
    if a == b {
        return vec![a];
    }
    let v = lca(a, b, k, leaves);
    let (l, _) = children[v - k];
    if !leaves[l].contains(&a) {
        let mut o = unfold(b, a, k, children, leaves, via);
        o.reverse();
        return o;
    }
    let (c, d) = via[a][b];
    let mut o = unfold(a, c, k, children, leaves, via);
    o.extend(unfold(d, b, k, children, leaves, via));
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Graph;
    use crate::models::{SbmModel, SbmPrior};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every order obtained by flipping any subset of internal nodes.
    fn brute_force(k: usize, children: &[(usize, usize)], cost: &[Vec<f64>]) -> f64 {
        let m = children.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << m) {
            let mut orders: Vec<Vec<usize>> = (0..k).map(|c| vec![c]).collect();
            for (s, &(a, b)) in children.iter().enumerate() {
                let (x, y) = if mask >> s & 1 == 1 { (b, a) } else { (a, b) };
                let mut o = orders[x].clone();
                o.extend_from_slice(&orders[y]);
                orders.push(o);
            }
            best = best.min(order_cost(&orders[k + m - 1], cost));
        }
        best
    }

    fn random_tree(k: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
        let mut roots: Vec<usize> = (0..k).collect();
        let mut children = Vec::new();
        let mut next = k;
        while roots.len() > 1 {
            let i = rng.random_range(0..roots.len());
            let a = roots.swap_remove(i);
            let j = rng.random_range(0..roots.len());
            let b = roots.swap_remove(j);
            children.push((a, b));
            roots.push(next);
            next += 1;
        }
        children
    }

    fn random_cost(k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut c = vec![vec![f64::INFINITY; k]; k];
        for a in 0..k {
            for b in a + 1..k {
                let v = rng.random::<f64>() * 10.0 - 3.0;
                c[a][b] = v;
                c[b][a] = v;
            }
        }
        c
    }

    fn contiguous(order: &[usize], k: usize, children: &[(usize, usize)]) -> bool {
        let leaves = node_leaves(k, children);
        let mut pos = vec![0; k];
        for (p, &l) in order.iter().enumerate() {
            pos[l] = p;
        }
        leaves.iter().all(|ls| {
            let lo = ls.iter().map(|&l| pos[l]).min().unwrap();
            let hi = ls.iter().map(|&l| pos[l]).max().unwrap();
            hi - lo + 1 == ls.len()
        })
    }

    #[test]
    fn threshold_of_two_singletons() {
        assert!((merge_threshold(0.0, 1, 1, 2) - 2f64.ln()).abs() < 1e-12);
        assert!(merge_threshold(1.0, 3, 4, 5) > merge_threshold(0.5, 3, 4, 5));
    }

    #[test]
    fn two_leaves_pick_smaller_order() {
        let cost = vec![vec![f64::INFINITY, 1.0], vec![1.0, f64::INFINITY]];
        assert_eq!(order_leaves(2, &[(1, 0)], &cost).unwrap(), vec![0, 1]);
    }

    #[test]
    fn chain_with_distance_cost_keeps_identity() {
        let k = 6;
        // ((((0,1),2),3),4),5
        let mut children = vec![(0, 1)];
        for c in 2..k {
            children.push((k + c - 2, c));
        }
        let cost: Vec<Vec<f64>> = (0..k)
            .map(|a| (0..k).map(|b| if a == b { f64::INFINITY } else { (a as f64 - b as f64).abs() }).collect())
            .collect();
        let order = order_leaves(k, &children, &cost).unwrap();
        assert_eq!(order, (0..k).collect::<Vec<_>>());
        assert_eq!(order_cost(&order, &cost), brute_force(k, &children, &cost));
    }

    #[test]
    fn rejects_bad_costs() {
        let mut cost = vec![vec![f64::INFINITY, 1.0], vec![2.0, f64::INFINITY]];
        assert!(order_leaves(2, &[(0, 1)], &cost).is_err());
        cost[1][0] = f64::NAN;
        assert!(order_leaves(2, &[(0, 1)], &cost).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(seed in any::<u64>(), k in 2usize..=9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let children = random_tree(k, &mut rng);
            let cost = random_cost(k, &mut rng);
            let order = order_leaves(k, &children, &cost).unwrap();
            let mut sorted = order.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..k).collect::<Vec<_>>());
            prop_assert!(contiguous(&order, k, &children));
            let want = brute_force(k, &children, &cost);
            prop_assert!((order_cost(&order, &cost) - want).abs() < 1e-9);
        }
    }

    fn planted_state(seed: u64) -> (SbmModel, SearchState<SbmModel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let z: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let p = if z[i] == z[j] {
                    0.7
                } else if z[i] / 2 == z[j] / 2 {
                    0.3
                } else {
                    0.02
                };
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let (g, _) = Graph::from_edges(n, edges, false).unwrap();
        let m = SbmModel::new(SbmPrior { a0: 1.0, b0: 1.0, directed: false }, g).unwrap();
        let s = SearchState::new(&m, Partition::from_labels(z), 1.0).unwrap();
        (m, s)
    }

    #[test]
    fn path_is_nested_and_cut_bounds_hold() {
        let (m, s) = planted_state(1);
        let path = build_path(&m, &s).unwrap();
        assert_eq!(path.steps.len(), 3);
        assert_eq!(path.cut(4).unwrap(), *s.partition());
        assert_eq!(path.cut(1).unwrap(), Partition::single(60));
        for k in 2..=4 {
            assert!(path.cut(k).unwrap().refines(&path.cut(k - 1).unwrap()));
        }
        assert!(path.cut(0).is_err() && path.cut(5).is_err());
        // Siblings fuse first: level 2 is the pair of superblocks.
        let two = path.cut(2).unwrap();
        let sup = Partition::from_labels((0..60).map(|i| (i % 4) / 2).collect());
        assert!(two.same_clustering(&sup));
        assert!(contiguous(&path.leaf_order, 4, &path.children()));
        let (leaf, h) = path.heights();
        assert!(h.windows(2).all(|w| w[0] <= w[1]));
        assert!(leaf <= h[0]);
    }

    #[test]
    fn level_obs_matches_recompute() {
        let (m, s) = planted_state(2);
        let path = build_path(&m, &s).unwrap();
        for k in 1..=4 {
            let p = path.cut(k).unwrap();
            let want = m.log_marginal(&m.init_stats(&p)).unwrap();
            assert!((path.level_obs(k).unwrap() - want).abs() < 1e-8);
        }
    }

    #[test]
    fn trivial_paths() {
        let (m, _) = planted_state(3);
        let one = SearchState::new(&m, Partition::single(60), 1.0).unwrap();
        let path = build_path(&m, &one).unwrap();
        assert!(path.steps.is_empty());
        assert_eq!(path.leaf_order, vec![0]);
        let two = SearchState::new(&m, Partition::from_labels((0..60).map(|i| i % 2).collect()), 1.0).unwrap();
        let path = build_path(&m, &two).unwrap();
        assert_eq!(path.steps.len(), 1);
        assert_eq!((path.steps[0].g, path.steps[0].h), (0, 1));
    }

    #[test]
    fn exports() {
        let (m, s) = planted_state(4);
        let path = build_path(&m, &s).unwrap();
        let d = path.dendrogram();
        assert_eq!(d.nodes.len(), 7);
        assert_eq!(d.nodes[d.root].size, 60);
        let nwk = path.newick();
        assert!(nwk.ends_with(';'));
        for c in 0..4 {
            assert!(nwk.contains(&format!("C{c}:")));
        }
        let json = serde_json::to_string(&path).unwrap();
        let back: HierarchyPath = serde_json::from_str(&json).unwrap();
        assert_eq!(back, path);
    }

    #[test]
    fn leaf_costs_are_symmetric_with_infinite_diagonal() {
        let (m, s) = planted_state(5);
        let c = leaf_cost_matrix(&m, &s);
        for a in 0..4 {
            assert!(c[a][a].is_infinite());
            for b in 0..4 {
                assert_eq!(c[a][b], c[b][a]);
            }
        }
        // Siblings (0, 1) are cheaper neighbours than cross pairs.
        assert!(c[0][1] < c[0][2] && c[2][3] < c[1][3]);
    }

    #[test]
    fn owned_levels_win_inside_their_intervals() {
        let (m, s) = planted_state(6);
        let path = build_path(&m, &s).unwrap();
        let intervals = path.owned_intervals(0.5f64.ln());
        assert!(!intervals.is_empty());
        for (k, lo, hi) in intervals {
            for frac in [0.25, 0.5, 0.75] {
                let la = lo + frac * (hi - lo);
                let own = path.level_icl(k, la).unwrap();
                for j in 1..=4 {
                    assert!(own >= path.level_icl(j, la).unwrap() - 1e-6, "level {k} vs {j} at ln alpha {la}");
                }
            }
        }
    }
}
