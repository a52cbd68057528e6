//! Genetic search over partitions: cross-partition crossover, split
//! mutation, rank selection, and the hybrid and plain genetic algorithms.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::local::{greedy_merge, greedy_swap, merge_down_to, MergeScope, MAX_SWAP_EPOCHS};
use super::{polish, random_partition, stream_rng, SearchState};
use crate::error::{Error, Result};
use crate::models::ObservationModel;
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub pop_size: usize,
    pub nb_max_gen: usize,
    pub prob_mutation: f64,
    pub k_max: usize,
    pub k_init: usize,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            pop_size: 20,
            nb_max_gen: 10,
            prob_mutation: 0.25,
            k_max: 100,
            k_init: 20,
            seed: 0,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 1 {
            return Err(Error::config("pop_size must be at least 1"));
        }
        if self.k_max < 1 || self.k_init < 1 {
            return Err(Error::config("k_max and k_init must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.prob_mutation) {
            return Err(Error::config("prob_mutation must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Best state found and the best total ICL after each generation.
#[derive(Debug, Clone)]
pub struct GaOutcome<M: ObservationModel> {
    pub best: SearchState<M>,
    pub history: Vec<f64>,
}

/// The cross partition of `p1` and `p2`: one cluster per non-empty
/// intersection, numbered by first appearance. Also returns, for every child
/// cluster, its cluster in `p1` and in `p2`.
pub fn crossover(p1: &Partition, p2: &Partition) -> Result<(Partition, Vec<usize>, Vec<usize>)> {
    if p1.n() != p2.n() {
        return Err(Error::LengthMismatch {
            left: p1.n(),
            right: p2.n(),
        });
    }
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut first = Vec::new();
    let mut second = Vec::new();
    let labels = p1
        .labels()
        .iter()
        .zip(p2.labels())
        .map(|(&a, &b)| {
            *ids.entry((a, b)).or_insert_with(|| {
                first.push(a);
                second.push(b);
                first.len() - 1
            })
        })
        .collect();
    let k = first.len();
    Ok((Partition::with_k(labels, k)?, first, second))
}

/// Splits a uniformly chosen cluster with at least two members into two
/// random non-empty halves; the second half becomes cluster `K`.
/// Returns `None` when every cluster is a singleton.
pub fn split_members<R: Rng + ?Sized>(partition: &Partition, rng: &mut R) -> Option<Vec<usize>> {
    let candidates: Vec<usize> = (0..partition.k()).filter(|&c| partition.sizes()[c] >= 2).collect();
    let &c = candidates.choose(rng)?;
    let members: Vec<usize> = (0..partition.n()).filter(|&i| partition.label(i) == c).collect();
    loop {
        let moved: Vec<usize> = members.iter().copied().filter(|_| rng.random::<bool>()).collect();
        if !moved.is_empty() && moved.len() < members.len() {
            return Some(moved);
        }
    }
}

pub fn mutate_split<R: Rng + ?Sized>(partition: &Partition, rng: &mut R) -> Partition {
    let Some(moved) = split_members(partition, rng) else {
        return partition.clone();
    };
    let mut out = partition.clone();
    let new = out.push_cluster();
    for i in moved {
        out.move_object(i, new);
    }
    out
}

/// Draws `count` indices with replacement, with probability proportional to
/// linear rank: the worst individual has weight 1 and the best weight
/// `icls.len()`. Equal values are ranked by index, the lower index ranking lower.
pub fn rank_select<R: Rng + ?Sized>(icls: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    if icls.is_empty() {
        return Vec::new();
    }
    let weights = rank_weights(icls);
    let dist = WeightedIndex::new(&weights).expect("positive weights");
    (0..count).map(|_| dist.sample(rng)).collect()
}

pub(crate) fn rank_weights(icls: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..icls.len()).collect();
    order.sort_by(|&a, &b| icls[a].total_cmp(&icls[b]).then(a.cmp(&b)));
    let mut weights = vec![0.0; icls.len()];
    for (rank, &idx) in order.iter().enumerate() {
        weights[idx] = (rank + 1) as f64;
    }
    weights
}

fn best_index<M: ObservationModel>(pop: &[SearchState<M>]) -> usize {
    let mut best = 0;
    for (i, s) in pop.iter().enumerate() {
        if s.icl().total > pop[best].icl().total {
            best = i;
        }
    }
    best
}

/// Stream reserved for selection within a generation.
const SELECTION_STREAM: u64 = u32::MAX as u64;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flavor {
    Hybrid,
    Genetic,
}

fn evolve<M: ObservationModel>(model: &M, params: &GaParams, alpha: f64, flavor: Flavor) -> Result<GaOutcome<M>> {
    params.validate()?;
    let n = model.n();
    if n == 0 {
        return Err(Error::data("nothing to cluster"));
    }
    let k_init = params.k_init.min(n).min(params.k_max);
    let mut pop: Vec<SearchState<M>> = (0..params.pop_size)
        .into_par_iter()
        .map(|idx| {
            let mut rng = stream_rng(params.seed, 0, idx as u64);
            let p = random_partition(n, k_init, &mut rng);
            let mut s = SearchState::new(model, p, alpha)?;
            if flavor == Flavor::Hybrid {
                greedy_swap(model, &mut s, &mut rng, MAX_SWAP_EPOCHS);
                s.refresh(model)?;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;

    let mut best = best_index(&pop);
    let mut history = vec![pop[best].icl().total];
    let mut stagnant = 0;
    for gen in 1..=params.nb_max_gen {
        if params.pop_size < 2 {
            break;
        }
        let icls: Vec<f64> = pop.iter().map(|s| s.icl().total).collect();
        let mut sel_rng = stream_rng(params.seed, gen as u64, SELECTION_STREAM);
        let parents = rank_select(&icls, 2 * (params.pop_size - 1), &mut sel_rng);
        let children: Vec<SearchState<M>> = (0..params.pop_size - 1)
            .into_par_iter()
            .map(|j| {
                let mut rng = stream_rng(params.seed, gen as u64, j as u64);
                let (a, b) = (&pop[parents[2 * j]], &pop[parents[2 * j + 1]]);
                make_child(model, a.partition(), b.partition(), params, alpha, flavor, &mut rng)
            })
            .collect::<Result<_>>()?;
        let elite = pop.swap_remove(best);
        pop = std::iter::once(elite).chain(children).collect();
        let prev = history[history.len() - 1];
        best = best_index(&pop);
        let now = pop[best].icl().total;
        history.push(now);
        if now > prev + 1e-9 {
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= 2 {
                break;
            }
        }
    }

    let mut best = pop.swap_remove(best);
    match flavor {
        Flavor::Hybrid => polish(model, &mut best, params.seed)?,
        Flavor::Genetic => {
            greedy_merge(model, &mut best, None);
            best.refresh(model)?;
        }
    }
    Ok(GaOutcome { best, history })
}

fn make_child<M: ObservationModel>(
    model: &M,
    a: &Partition,
    b: &Partition,
    params: &GaParams,
    alpha: f64,
    flavor: Flavor,
    rng: &mut ChaCha8Rng,
) -> Result<SearchState<M>> {
    let (child, first, second) = crossover(a, b)?;
    let mut s = SearchState::new(model, child, alpha)?;
    match flavor {
        Flavor::Hybrid => {
            greedy_merge(model, &mut s, Some(MergeScope::new(&first, &second)));
            if s.k() > params.k_max {
                merge_down_to(model, &mut s, params.k_max);
            }
            if s.k() < params.k_max && rng.random::<f64>() < params.prob_mutation {
                if let Some(moved) = split_members(s.partition(), rng) {
                    s.split_off(model, &moved)?;
                    greedy_swap(model, &mut s, rng, MAX_SWAP_EPOCHS);
                }
            }
        }
        Flavor::Genetic => {
            random_merges_down_to(model, &mut s, params.k_max, rng);
            if s.k() < params.k_max && rng.random::<f64>() < params.prob_mutation {
                if let Some(moved) = split_members(s.partition(), rng) {
                    s.split_off(model, &moved)?;
                }
            }
        }
    }
    s.refresh(model)?;
    Ok(s)
}

fn random_merges_down_to<M: ObservationModel, R: Rng + ?Sized>(model: &M, s: &mut SearchState<M>, k_max: usize, rng: &mut R) {
    while s.k() > k_max.max(1) {
        let g = rng.random_range(0..s.k());
        let mut h = rng.random_range(0..s.k() - 1);
        if h >= g {
            h += 1;
        }
        let (g, h) = (g.min(h), g.max(h));
        let obs = model.delta_merge(s.stats(), g, h);
        s.apply_merge_with(model, g, h, obs);
    }
}

/// Genetic algorithm hybridized with greedy swap and merge local search.
pub fn hybrid_ga<M: ObservationModel>(model: &M, params: &GaParams, alpha: f64) -> Result<GaOutcome<M>> {
    evolve(model, params, alpha, Flavor::Hybrid)
}

/// Genetic algorithm without local search; only the returned best receives
/// a final greedy merge.
pub fn genetic_ga<M: ObservationModel>(model: &M, params: &GaParams, alpha: f64) -> Result<GaOutcome<M>> {
    evolve(model, params, alpha, Flavor::Genetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::adjusted_rand_index;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn p(labels: &[usize]) -> Partition {
        Partition::from_labels(labels.to_vec())
    }

    #[test]
    fn crossover_examples() {
        let a = p(&[0, 0, 1, 1, 2]);
        assert_eq!(crossover(&a, &a).unwrap().0, a);
        let (c, _, _) = crossover(&p(&[0, 0, 1, 1]), &p(&[0, 1, 0, 1])).unwrap();
        assert_eq!(c, Partition::singletons(4));
        let (c, f, s) = crossover(&p(&[0, 0, 0, 1, 1]), &p(&[0, 0, 1, 1, 1])).unwrap();
        assert!(c.same_clustering(&p(&[0, 0, 1, 2, 2])));
        assert_eq!(f, vec![0, 0, 1]);
        assert_eq!(s, vec![0, 1, 1]);
        assert!(crossover(&p(&[0]), &p(&[0, 0])).is_err());
    }

    #[test]
    fn split_adds_one_cluster() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = p(&[0, 0, 0, 1, 1, 2]);
        for _ in 0..50 {
            let b = mutate_split(&a, &mut rng);
            assert_eq!(b.k(), a.k() + 1);
            assert!(b.is_compact());
            assert!(b.refines(&a));
            let new = b.k() - 1;
            let origin = a.label((0..6).find(|&i| b.label(i) == new).unwrap());
            let union = (0..6).filter(|&i| a.label(i) == origin).all(|i| b.label(i) == new || b.label(i) == origin);
            assert!(union);
        }
        let s = Partition::singletons(4);
        assert_eq!(mutate_split(&s, &mut rng), s);
    }

    #[test]
    fn rank_selection_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(rank_select(&[-3.0], 5, &mut rng), vec![0; 5]);
        assert_eq!(rank_weights(&[1.0, 1.0, 1.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(rank_weights(&[-1.0, -5.0, 2.0]), vec![2.0, 1.0, 3.0]);
    }

    #[test]
    fn rank_selection_frequency_matches_linear_law() {
        let icls = [-10.0, -3.0, -7.0, -1.0, -20.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 100_000;
        let picks = rank_select(&icls, draws, &mut rng);
        let best = picks.iter().filter(|&&i| i == 3).count() as f64;
        // P(best) = pop / (pop (pop + 1) / 2) = 2 / (pop + 1)
        let prob = 2.0 / 6.0;
        let sd = (draws as f64 * prob * (1.0 - prob)).sqrt();
        assert!((best - draws as f64 * prob).abs() < 3.0 * sd);
    }

    proptest! {
        #[test]
        fn child_refines_both_parents(a in prop::collection::vec(0usize..5, 1..60), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<usize> = (0..a.len()).map(|_| rng.random_range(0..4)).collect();
            let (pa, pb) = (p(&a), p(&b));
            let (c, _, _) = crossover(&pa, &pb).unwrap();
            prop_assert!(c.refines(&pa) && c.refines(&pb));
            prop_assert!(c.k() <= pa.k() * pb.k());
            prop_assert!(adjusted_rand_index(&c, &c).unwrap() == 1.0);
        }
    }
}
