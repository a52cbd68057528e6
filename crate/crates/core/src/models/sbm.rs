//! Binary stochastic block model with Beta priors on block densities.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{dirichlet_point, remove_row_col, ModelParams, ModelPrior, ObservationModel};
use crate::data::Graph;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::special::ln_beta;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmPrior {
    pub a0: f64,
    pub b0: f64,
    pub directed: bool,
}

impl SbmPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.a0.is_finite() && self.b0 > 0.0 && self.b0.is_finite()) {
            return Err(Error::config(format!(
                "sbm prior needs a0 > 0 and b0 > 0, got a0 = {}, b0 = {}",
                self.a0, self.b0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SbmModel {
    prior: SbmPrior,
    graph: Graph,
    ln_b0: f64,
}

/// Block edge counts and the cached per-block marginal terms.
///
/// Both matrices are stored in full (`k × k`, row-major); for undirected
/// graphs they are symmetric and only `k ≤ l` enters the marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmStats {
    k: usize,
    sizes: Vec<u64>,
    edges: Vec<u64>,
    terms: Vec<f64>,
}

impl SbmStats {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn block_edges(&self, a: usize, b: usize) -> u64 {
        self.edges[a * self.k + b]
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }
}

impl SbmModel {
    /// Binds the prior to a graph. An undirected prior on a directed graph
    /// symmetrizes the graph by OR.
    pub fn new(prior: SbmPrior, graph: Graph) -> Result<Self> {
        prior.validate()?;
        let graph = match (prior.directed, graph.is_directed()) {
            (false, true) => {
                if !graph.is_symmetric() {
                    warn!("asymmetric adjacency symmetrized for an undirected model");
                }
                graph.to_undirected()
            }
            (true, false) => {
                return Err(Error::config("directed sbm requested on an undirected graph"));
            }
            _ => graph,
        };
        let ln_b0 = ln_beta(prior.a0, prior.b0);
        Ok(SbmModel { prior, graph, ln_b0 })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    #[inline]
    fn pair_term(&self, e: u64, m: u64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        ln_beta(self.prior.a0 + e as f64, self.prior.b0 + (m - e) as f64) - self.ln_b0
    }

    #[inline]
    fn capacity(&self, na: u64, nb: u64, same: bool) -> u64 {
        if !same {
            na * nb
        } else if self.prior.directed {
            na * na.saturating_sub(1)
        } else {
            na * na.saturating_sub(1) / 2
        }
    }

    fn refresh_terms(&self, s: &mut SbmStats, rows: &[usize]) {
        let k = s.k;
        for &a in rows {
            for b in 0..k {
                let t = self.pair_term(s.edges[a * k + b], self.capacity(s.sizes[a], s.sizes[b], a == b));
                s.terms[a * k + b] = t;
                s.terms[b * k + a] = if self.prior.directed {
                    self.pair_term(s.edges[b * k + a], self.capacity(s.sizes[b], s.sizes[a], a == b))
                } else {
                    t
                };
            }
        }
    }

    /// Neighbour counts of `i` per cluster: outgoing, and incoming when directed.
    fn block_degrees(&self, labels: &[usize], i: usize, k: usize) -> (Vec<u64>, Vec<u64>) {
        let mut dout = vec![0u64; k];
        for &j in self.graph.out_neighbors(i) {
            dout[labels[j as usize]] += 1;
        }
        let din = if self.prior.directed {
            let mut din = vec![0u64; k];
            for &j in self.graph.in_neighbors(i) {
                din[labels[j as usize]] += 1;
            }
            din
        } else {
            Vec::new()
        };
        (dout, din)
    }

    fn swap_delta_with(&self, s: &SbmStats, dout: &[u64], din: &[u64], g: usize, h: usize) -> f64 {
        let k = s.k;
        let (ng, nh) = (s.sizes[g], s.sizes[h]);
        let (ng2, nh2) = (ng - 1, nh + 1);
        let e = |a: usize, b: usize| s.edges[a * k + b];
        let t = |a: usize, b: usize| s.terms[a * k + b];
        let mut delta = 0.0;
        if self.prior.directed {
            for c in 0..k {
                if c == g || c == h {
                    continue;
                }
                let nc = s.sizes[c];
                delta += self.pair_term(e(g, c) - dout[c], ng2 * nc) - t(g, c);
                delta += self.pair_term(e(h, c) + dout[c], nh2 * nc) - t(h, c);
                delta += self.pair_term(e(c, g) - din[c], nc * ng2) - t(c, g);
                delta += self.pair_term(e(c, h) + din[c], nc * nh2) - t(c, h);
            }
            delta += self.pair_term(e(g, g) - dout[g] - din[g], self.capacity(ng2, ng2, true)) - t(g, g);
            delta += self.pair_term(e(h, h) + dout[h] + din[h], self.capacity(nh2, nh2, true)) - t(h, h);
            delta += self.pair_term(e(g, h) + din[g] - dout[h], ng2 * nh2) - t(g, h);
            delta += self.pair_term(e(h, g) + dout[g] - din[h], nh2 * ng2) - t(h, g);
        } else {
            let d = dout;
            for c in 0..k {
                if c == g || c == h {
                    continue;
                }
                let nc = s.sizes[c];
                delta += self.pair_term(e(g, c) - d[c], ng2 * nc) - t(g, c);
                delta += self.pair_term(e(h, c) + d[c], nh2 * nc) - t(h, c);
            }
            delta += self.pair_term(e(g, g) - d[g], self.capacity(ng2, ng2, true)) - t(g, g);
            delta += self.pair_term(e(h, h) + d[h], self.capacity(nh2, nh2, true)) - t(h, h);
            delta += self.pair_term(e(g, h) + d[g] - d[h], ng2 * nh2) - t(g, h);
        }
        delta
    }
}

impl ObservationModel for SbmModel {
    type Stats = SbmStats;

    fn n(&self) -> usize {
        self.graph.n()
    }

    fn init_stats(&self, partition: &Partition) -> SbmStats {
        let k = partition.k();
        let labels = partition.labels();
        let mut edges = vec![0u64; k * k];
        for (a, b) in self.graph.edges() {
            let (za, zb) = (labels[a], labels[b]);
            edges[za * k + zb] += 1;
            if !self.prior.directed && za != zb {
                edges[zb * k + za] += 1;
            }
        }
        let mut s = SbmStats {
            k,
            sizes: partition.sizes().iter().map(|&x| x as u64).collect(),
            edges,
            terms: vec![0.0; k * k],
        };
        let rows: Vec<usize> = (0..k).collect();
        self.refresh_terms(&mut s, &rows);
        s
    }

    fn log_marginal(&self, s: &SbmStats) -> Result<f64> {
        let k = s.k;
        let mut acc = 0.0;
        for a in 0..k {
            let start = if self.prior.directed { 0 } else { a };
            for b in start..k {
                acc += s.terms[a * k + b];
            }
        }
        Ok(acc)
    }

    fn delta_swap(&self, s: &SbmStats, labels: &[usize], i: usize, from: usize, to: usize) -> f64 {
        let (dout, din) = self.block_degrees(labels, i, s.k);
        self.swap_delta_with(s, &dout, &din, from, to)
    }

    fn swap_deltas(&self, s: &SbmStats, labels: &[usize], i: usize, out: &mut [f64]) {
        let from = labels[i];
        let (dout, din) = self.block_degrees(labels, i, s.k);
        for (h, slot) in out.iter_mut().enumerate() {
            *slot = if h == from {
                0.0
            } else {
                self.swap_delta_with(s, &dout, &din, from, h)
            };
        }
    }

    fn apply_swap(&self, s: &mut SbmStats, labels: &[usize], i: usize, g: usize, h: usize) {
        let k = s.k;
        let (dout, din) = self.block_degrees(labels, i, k);
        if self.prior.directed {
            for c in 0..k {
                if c == g || c == h {
                    continue;
                }
                s.edges[g * k + c] -= dout[c];
                s.edges[h * k + c] += dout[c];
                s.edges[c * k + g] -= din[c];
                s.edges[c * k + h] += din[c];
            }
            let (gg, hh, gh, hg) = (g * k + g, h * k + h, g * k + h, h * k + g);
            let new_gh = s.edges[gh] + din[g] - dout[h];
            let new_hg = s.edges[hg] + dout[g] - din[h];
            s.edges[gg] -= dout[g] + din[g];
            s.edges[hh] += dout[h] + din[h];
            s.edges[gh] = new_gh;
            s.edges[hg] = new_hg;
        } else {
            for c in 0..k {
                if c == g || c == h {
                    continue;
                }
                s.edges[g * k + c] -= dout[c];
                s.edges[c * k + g] -= dout[c];
                s.edges[h * k + c] += dout[c];
                s.edges[c * k + h] += dout[c];
            }
            let new_gh = s.edges[g * k + h] + dout[g] - dout[h];
            s.edges[g * k + g] -= dout[g];
            s.edges[h * k + h] += dout[h];
            s.edges[g * k + h] = new_gh;
            s.edges[h * k + g] = new_gh;
        }
        s.sizes[g] -= 1;
        s.sizes[h] += 1;
        self.refresh_terms(s, &[g, h]);
    }

    fn remove_cluster(&self, s: &mut SbmStats, c: usize) {
        debug_assert_eq!(s.sizes[c], 0);
        remove_row_col(&mut s.edges, s.k, c);
        remove_row_col(&mut s.terms, s.k, c);
        s.sizes.remove(c);
        s.k -= 1;
    }

    fn delta_merge(&self, s: &SbmStats, g: usize, h: usize) -> f64 {
        let k = s.k;
        let nm = s.sizes[g] + s.sizes[h];
        let e = |a: usize, b: usize| s.edges[a * k + b];
        let t = |a: usize, b: usize| s.terms[a * k + b];
        let mut delta = 0.0;
        for c in 0..k {
            if c == g || c == h {
                continue;
            }
            let nc = s.sizes[c];
            delta += self.pair_term(e(g, c) + e(h, c), nm * nc) - t(g, c) - t(h, c);
            if self.prior.directed {
                delta += self.pair_term(e(c, g) + e(c, h), nc * nm) - t(c, g) - t(c, h);
            }
        }
        if self.prior.directed {
            let inside = e(g, g) + e(h, h) + e(g, h) + e(h, g);
            delta += self.pair_term(inside, self.capacity(nm, nm, true)) - t(g, g) - t(h, h) - t(g, h) - t(h, g);
        } else {
            let inside = e(g, g) + e(h, h) + e(g, h);
            delta += self.pair_term(inside, self.capacity(nm, nm, true)) - t(g, g) - t(h, h) - t(g, h);
        }
        delta
    }

    fn apply_merge(&self, s: &mut SbmStats, g: usize, h: usize) {
        let k = s.k;
        let inside = if self.prior.directed {
            s.edges[g * k + g] + s.edges[h * k + h] + s.edges[g * k + h] + s.edges[h * k + g]
        } else {
            s.edges[g * k + g] + s.edges[h * k + h] + s.edges[g * k + h]
        };
        for c in 0..k {
            if c == g || c == h {
                continue;
            }
            s.edges[g * k + c] += s.edges[h * k + c];
            s.edges[c * k + g] += s.edges[c * k + h];
        }
        s.edges[g * k + g] = inside;
        s.sizes[g] += s.sizes[h];
        s.sizes[h] = 0;
        self.remove_cluster(s, h);
        let g = if g > h { g - 1 } else { g };
        self.refresh_terms(s, &[g]);
    }

    fn map_estimates(&self, s: &SbmStats) -> ModelParams {
        let k = s.k;
        let mut theta = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in 0..k {
                let e = s.edges[a * k + b] as f64;
                let m = self.capacity(s.sizes[a], s.sizes[b], a == b) as f64;
                theta[a][b] = dirichlet_point(&[self.prior.a0 + e, self.prior.b0 + m - e])[0];
            }
        }
        ModelParams::Sbm { theta }
    }

    fn prior(&self) -> ModelPrior {
        ModelPrior::Sbm(self.prior)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::check_moves;
    use super::*;
    use crate::special::ln_gamma;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(n: usize, edges: &[(usize, usize)], directed: bool) -> SbmModel {
        let (g, _) = Graph::from_edges(n, edges.iter().copied(), directed).unwrap();
        SbmModel::new(SbmPrior { a0: 1.0, b0: 1.0, directed }, g).unwrap()
    }

    fn random_graph(n: usize, p: f64, directed: bool, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && (directed || i < j) && rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    /// Sequential collapsed predictive: nodes arrive one by one and each new
    /// dyad is predicted from the Beta posterior of its block pair.
    fn sequential_oracle(n: usize, edges: &[(usize, usize)], labels: &[usize], directed: bool, a0: f64, b0: f64) -> f64 {
        let mut adj = vec![false; n * n];
        for &(a, b) in edges {
            adj[a * n + b] = true;
            if !directed {
                adj[b * n + a] = true;
            }
        }
        let k = labels.iter().max().unwrap() + 1;
        let mut ones = vec![0.0; k * k];
        let mut zeros = vec![0.0; k * k];
        let mut acc = 0.0;
        let mut observe = |a: usize, b: usize, x: bool, acc: &mut f64| {
            let (za, zb) = if directed || labels[a] <= labels[b] {
                (labels[a], labels[b])
            } else {
                (labels[b], labels[a])
            };
            let idx = za * k + zb;
            let (o, z) = (ones[idx], zeros[idx]);
            let p1 = (a0 + o) / (a0 + b0 + o + z);
            *acc += if x { p1.ln() } else { (1.0 - p1).ln() };
            if x {
                ones[idx] += 1.0;
            } else {
                zeros[idx] += 1.0;
            }
        };
        for i in 0..n {
            for j in 0..i {
                observe(j, i, adj[j * n + i], &mut acc);
                if directed {
                    observe(i, j, adj[i * n + j], &mut acc);
                }
            }
        }
        acc
    }

    #[test]
    fn single_edge_pair() {
        let m = model(2, &[(0, 1)], false);
        let s = m.init_stats(&Partition::single(2));
        assert_eq!(s.block_edges(0, 0), 1);
        assert_eq!(m.capacity(2, 2, true), 1);
        let v = m.log_marginal(&s).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn map_single_edge_falls_back_to_mean() {
        // Posterior Beta(2, 1): the mode sits on the boundary, so the mean 2/3 is reported.
        let m = model(2, &[(0, 1)], false);
        let s = m.init_stats(&Partition::single(2));
        match m.map_estimates(&s) {
            ModelParams::Sbm { theta } => assert!((theta[0][0] - 2.0 / 3.0).abs() < 1e-12),
            _ => unreachable!(),
        }
        // Beta(3, 2) has an interior mode 2/3.
        let m3 = model(3, &[(0, 1), (1, 2)], false);
        match m3.map_estimates(&m3.init_stats(&Partition::single(3))) {
            ModelParams::Sbm { theta } => assert!((theta[0][0] - 2.0 / 3.0).abs() < 1e-12),
            _ => unreachable!(),
        }
        // With no pair observed the posterior is the prior: mean 1/2.
        let s = m.init_stats(&Partition::singletons(2));
        match m.map_estimates(&s) {
            ModelParams::Sbm { theta } => assert_eq!(theta[0][0], 0.5),
            _ => unreachable!(),
        }
    }

    #[test]
    fn toy_planted_swap_matches_recompute() {
        let m = model(4, &[(0, 1), (2, 3)], false);
        let p = Partition::from_labels(vec![0, 0, 1, 1]);
        check_moves(&m, &p, 1e-10);
    }

    #[test]
    fn merge_is_symmetric_and_k1_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_graph(12, 0.3, false, &mut rng);
        let m = model(12, &e, false);
        let p = Partition::from_labels((0..12).map(|i| i % 3).collect());
        let s = m.init_stats(&p);
        assert!((m.delta_merge(&s, 0, 2) - m.delta_merge(&s, 2, 0)).abs() < 1e-10);
        let p2 = Partition::from_labels((0..12).map(|i| i % 2).collect());
        let s2 = m.init_stats(&p2);
        let mut s3 = s2.clone();
        m.apply_merge(&mut s3, 0, 1);
        let one = m.log_marginal(&m.init_stats(&Partition::single(12))).unwrap();
        assert!((m.log_marginal(&s3).unwrap() - one).abs() < 1e-10);
    }

    #[test]
    fn edge_totals_conserved_under_swaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = random_graph(15, 0.25, false, &mut rng);
        let m = model(15, &e, false);
        let mut p = Partition::from_labels((0..15).map(|i| i % 4).collect());
        let mut s = m.init_stats(&p);
        let total = |s: &SbmStats| {
            let mut t = 0;
            for a in 0..s.k {
                for b in a..s.k {
                    t += s.block_edges(a, b);
                }
            }
            t
        };
        for step in 0..30 {
            let i = step % 15;
            let g = p.label(i);
            let h = (g + 1) % p.k();
            if p.sizes()[g] == 1 {
                continue;
            }
            m.apply_swap(&mut s, p.labels(), i, g, h);
            p.move_object(i, h);
            assert_eq!(total(&s), e.len() as u64);
            assert_eq!(s, m.init_stats(&p));
        }
    }

    #[test]
    fn directed_sequential_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = random_graph(9, 0.3, true, &mut rng);
        let labels: Vec<usize> = (0..9).map(|i| i % 3).collect();
        let (g, _) = Graph::from_edges(9, e.iter().copied(), true).unwrap();
        let m = SbmModel::new(SbmPrior { a0: 0.7, b0: 1.3, directed: true }, g).unwrap();
        let v = m.log_marginal(&m.init_stats(&Partition::from_labels(labels.clone()))).unwrap();
        let want = sequential_oracle(9, &e, &labels, true, 0.7, 1.3);
        assert!((v - want).abs() < 1e-8);
    }

    #[test]
    fn beta_function_closed_form() {
        // lnB(a0 + e, b0 + m - e) for a0 = b0 = 1, e = 2, m = 5 is ln(2!3!/6!).
        let direct = ln_gamma(3.0) + ln_gamma(4.0) - ln_gamma(7.0);
        assert!((ln_beta(3.0, 4.0) - direct).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn deltas_match_recompute(seed in any::<u64>(), n in 3usize..14, k in 2usize..5, directed in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = random_graph(n, 0.35, directed, &mut rng);
            let (g, _) = Graph::from_edges(n, e.iter().copied(), directed).unwrap();
            let m = SbmModel::new(SbmPrior { a0: 0.6, b0: 1.4, directed }, g).unwrap();
            let p = Partition::from_labels((0..n).map(|_| rng.random_range(0..k)).collect());
            check_moves(&m, &p, 1e-8);
        }

        #[test]
        fn sequential_predictive(seed in any::<u64>(), n in 2usize..20, k in 1usize..4, directed in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = random_graph(n, 0.3, directed, &mut rng);
            let labels = Partition::from_labels((0..n).map(|_| rng.random_range(0..k)).collect());
            let (g, _) = Graph::from_edges(n, e.iter().copied(), directed).unwrap();
            let m = SbmModel::new(SbmPrior { a0: 1.0, b0: 1.0, directed }, g).unwrap();
            let v = m.log_marginal(&m.init_stats(&labels)).unwrap();
            let want = sequential_oracle(n, &e, labels.labels(), directed, 1.0, 1.0);
            prop_assert!((v - want).abs() < 1e-8);
        }
    }
}
