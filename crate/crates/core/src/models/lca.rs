//! Latent class analysis: independent categorical variables within each cluster.

use serde::{Deserialize, Serialize};

use super::{dirichlet_point, remove_block, ModelParams, ModelPrior, ObservationModel};
use crate::data::CategoricalData;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::special::ln_gamma;

/// Symmetric `Dirichlet(beta)` prior on every per-cluster modality distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcaPrior {
    pub beta: f64,
}

impl LcaPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LcaModel {
    prior: LcaPrior,
    data: CategoricalData,
    arities: Vec<usize>,
    /// Offset of variable `j` in a cluster's modality-count block.
    offsets: Vec<usize>,
    width: usize,
}

/// Modality counts `n_kjc`, one block of `Σ_j d_j` entries per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct LcaStats {
    k: usize,
    sizes: Vec<u64>,
    counts: Vec<u64>,
    terms: Vec<f64>,
}

impl LcaStats {
    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }
}

impl LcaModel {
    pub fn new(prior: LcaPrior, data: CategoricalData) -> Result<Self> {
        prior.validate()?;
        let arities = data.arities();
        if arities.contains(&0) {
            return Err(Error::data("every categorical variable needs at least one modality"));
        }
        let mut offsets = Vec::with_capacity(arities.len());
        let mut width = 0;
        for &d in &arities {
            offsets.push(width);
            width += d;
        }
        Ok(LcaModel {
            prior,
            data,
            arities,
            offsets,
            width,
        })
    }

    pub fn data(&self) -> &CategoricalData {
        &self.data
    }

    fn cluster_term(&self, n: u64, counts: &[u64]) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let beta = self.prior.beta;
        let lg_beta = ln_gamma(beta);
        let mut acc = 0.0;
        for (j, &d) in self.arities.iter().enumerate() {
            let db = d as f64 * beta;
            acc += ln_gamma(db) - ln_gamma(db + n as f64);
            for &c in &counts[self.offsets[j]..self.offsets[j] + d] {
                if c > 0 {
                    acc += ln_gamma(beta + c as f64) - lg_beta;
                }
            }
        }
        acc
    }

    fn refresh(&self, st: &mut LcaStats, c: usize) {
        let w = self.width;
        st.terms[c] = self.cluster_term(st.sizes[c], &st.counts[c * w..(c + 1) * w]);
    }

    fn leave_delta(&self, st: &LcaStats, g: usize, i: usize) -> f64 {
        let beta = self.prior.beta;
        let ng = st.sizes[g] as f64;
        let base = g * self.width;
        let mut acc = 0.0;
        for (j, &code) in self.data.row(i).iter().enumerate() {
            let c = st.counts[base + self.offsets[j] + code as usize] as f64;
            acc += (self.arities[j] as f64 * beta + ng - 1.0).ln() - (beta + c - 1.0).ln();
        }
        acc
    }

    fn join_delta(&self, st: &LcaStats, h: usize, i: usize) -> f64 {
        let beta = self.prior.beta;
        let nh = st.sizes[h] as f64;
        let base = h * self.width;
        let mut acc = 0.0;
        for (j, &code) in self.data.row(i).iter().enumerate() {
            let c = st.counts[base + self.offsets[j] + code as usize] as f64;
            acc += (beta + c).ln() - (self.arities[j] as f64 * beta + nh).ln();
        }
        acc
    }
}

impl ObservationModel for LcaModel {
    type Stats = LcaStats;

    fn n(&self) -> usize {
        self.data.n()
    }

    fn init_stats(&self, partition: &Partition) -> LcaStats {
        let (k, w) = (partition.k(), self.width);
        let mut st = LcaStats {
            k,
            sizes: partition.sizes().iter().map(|&x| x as u64).collect(),
            counts: vec![0; k * w],
            terms: vec![0.0; k],
        };
        for (i, &c) in partition.labels().iter().enumerate() {
            for (j, &code) in self.data.row(i).iter().enumerate() {
                st.counts[c * w + self.offsets[j] + code as usize] += 1;
            }
        }
        for c in 0..k {
            self.refresh(&mut st, c);
        }
        st
    }

    fn log_marginal(&self, st: &LcaStats) -> Result<f64> {
        Ok(st.terms.iter().sum())
    }

    fn delta_swap(&self, st: &LcaStats, _labels: &[usize], i: usize, g: usize, h: usize) -> f64 {
        self.leave_delta(st, g, i) + self.join_delta(st, h, i)
    }

    fn swap_deltas(&self, st: &LcaStats, labels: &[usize], i: usize, out: &mut [f64]) {
        let g = labels[i];
        let leave = self.leave_delta(st, g, i);
        for (h, slot) in out.iter_mut().enumerate() {
            *slot = if h == g { 0.0 } else { leave + self.join_delta(st, h, i) };
        }
    }

    fn apply_swap(&self, st: &mut LcaStats, _labels: &[usize], i: usize, g: usize, h: usize) {
        let w = self.width;
        for (j, &code) in self.data.row(i).iter().enumerate() {
            let off = self.offsets[j] + code as usize;
            st.counts[g * w + off] -= 1;
            st.counts[h * w + off] += 1;
        }
        st.sizes[g] -= 1;
        st.sizes[h] += 1;
        self.refresh(st, g);
        self.refresh(st, h);
    }

    fn remove_cluster(&self, st: &mut LcaStats, c: usize) {
        remove_block(&mut st.counts, self.width, c);
        st.sizes.remove(c);
        st.terms.remove(c);
        st.k -= 1;
    }

    fn delta_merge(&self, st: &LcaStats, g: usize, h: usize) -> f64 {
        let w = self.width;
        let merged: Vec<u64> = (0..w).map(|a| st.counts[g * w + a] + st.counts[h * w + a]).collect();
        self.cluster_term(st.sizes[g] + st.sizes[h], &merged) - st.terms[g] - st.terms[h]
    }

    fn apply_merge(&self, st: &mut LcaStats, g: usize, h: usize) {
        let w = self.width;
        for a in 0..w {
            st.counts[g * w + a] += st.counts[h * w + a];
        }
        st.sizes[g] += st.sizes[h];
        st.sizes[h] = 0;
        self.refresh(st, g);
        self.remove_cluster(st, h);
    }

    fn map_estimates(&self, st: &LcaStats) -> ModelParams {
        let w = self.width;
        let beta = self.prior.beta;
        let theta = (0..st.k)
            .map(|c| {
                self.arities
                    .iter()
                    .enumerate()
                    .map(|(j, &d)| {
                        let post: Vec<f64> = st.counts[c * w + self.offsets[j]..c * w + self.offsets[j] + d]
                            .iter()
                            .map(|&x| beta + x as f64)
                            .collect();
                        dirichlet_point(&post)
                    })
                    .collect()
            })
            .collect();
        ModelParams::Lca { theta }
    }

    fn prior(&self) -> ModelPrior {
        ModelPrior::Lca(self.prior)
    }
}
