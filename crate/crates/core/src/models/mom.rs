//! Mixture of multinomials over count vectors.

use serde::{Deserialize, Serialize};

use super::{dirichlet_point, remove_block, ModelParams, ModelPrior, ObservationModel};
use crate::data::CountData;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::special::{ln_gamma, ln_rising};

/// Symmetric `Dirichlet(beta)` prior on each cluster's multinomial weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomPrior {
    pub beta: f64,
}

impl MomPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

/// The log marginal includes `Σ_i [ln Γ(L_i + 1) − Σ_j ln Γ(x_ij + 1)]`, the
/// multinomial coefficients of the rows, which does not depend on the partition.
#[derive(Debug, Clone)]
pub struct MomModel {
    prior: MomPrior,
    data: CountData,
    totals: Vec<u64>,
    constant: f64,
}

/// Per-cluster column sums `t_kj` and totals `T_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomStats {
    k: usize,
    sizes: Vec<u64>,
    sums: Vec<u64>,
    totals: Vec<u64>,
    terms: Vec<f64>,
}

impl MomModel {
    pub fn new(prior: MomPrior, data: CountData) -> Result<Self> {
        prior.validate()?;
        if data.p() == 0 {
            return Err(Error::data("count data needs at least one column"));
        }
        let mut totals = Vec::with_capacity(data.n());
        let mut constant = 0.0;
        for i in 0..data.n() {
            let mut l = 0;
            for &(_, x) in data.row(i) {
                l += x;
                constant -= ln_gamma(x as f64 + 1.0);
            }
            constant += ln_gamma(l as f64 + 1.0);
            totals.push(l);
        }
        Ok(MomModel {
            prior,
            data,
            totals,
            constant,
        })
    }

    fn cluster_term(&self, n: u64, sums: &[u64], total: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let beta = self.prior.beta;
        let pb = beta * self.data.p() as f64;
        let lg_beta = ln_gamma(beta);
        let mut acc = ln_gamma(pb) - ln_gamma(pb + total as f64);
        for &t in sums {
            if t > 0 {
                acc += ln_gamma(beta + t as f64) - lg_beta;
            }
        }
        acc
    }

    fn refresh(&self, st: &mut MomStats, c: usize) {
        let p = self.data.p();
        st.terms[c] = self.cluster_term(st.sizes[c], &st.sums[c * p..(c + 1) * p], st.totals[c]);
    }

    fn leave_delta(&self, st: &MomStats, g: usize, i: usize) -> f64 {
        if st.sizes[g] == 1 {
            return -st.terms[g];
        }
        let p = self.data.p();
        let beta = self.prior.beta;
        let pb = beta * p as f64;
        let l = self.totals[i];
        let mut acc = ln_rising(pb + (st.totals[g] - l) as f64, l);
        for &(j, x) in self.data.row(i) {
            acc -= ln_rising(beta + (st.sums[g * p + j as usize] - x) as f64, x);
        }
        acc
    }

    fn join_delta(&self, st: &MomStats, h: usize, i: usize) -> f64 {
        let p = self.data.p();
        let beta = self.prior.beta;
        let pb = beta * p as f64;
        let mut acc = -ln_rising(pb + st.totals[h] as f64, self.totals[i]);
        for &(j, x) in self.data.row(i) {
            acc += ln_rising(beta + st.sums[h * p + j as usize] as f64, x);
        }
        acc
    }
}

impl ObservationModel for MomModel {
    type Stats = MomStats;

    fn n(&self) -> usize {
        self.data.n()
    }

    fn init_stats(&self, partition: &Partition) -> MomStats {
        let (k, p) = (partition.k(), self.data.p());
        let mut st = MomStats {
            k,
            sizes: partition.sizes().iter().map(|&x| x as u64).collect(),
            sums: vec![0; k * p],
            totals: vec![0; k],
            terms: vec![0.0; k],
        };
        for (i, &c) in partition.labels().iter().enumerate() {
            for &(j, x) in self.data.row(i) {
                st.sums[c * p + j as usize] += x;
            }
            st.totals[c] += self.totals[i];
        }
        for c in 0..k {
            self.refresh(&mut st, c);
        }
        st
    }

    fn log_marginal(&self, st: &MomStats) -> Result<f64> {
        Ok(st.terms.iter().sum::<f64>() + self.constant)
    }

    fn delta_swap(&self, st: &MomStats, _labels: &[usize], i: usize, g: usize, h: usize) -> f64 {
        self.leave_delta(st, g, i) + self.join_delta(st, h, i)
    }

    fn swap_deltas(&self, st: &MomStats, labels: &[usize], i: usize, out: &mut [f64]) {
        let g = labels[i];
        let leave = self.leave_delta(st, g, i);
        for (h, slot) in out.iter_mut().enumerate() {
            *slot = if h == g { 0.0 } else { leave + self.join_delta(st, h, i) };
        }
    }

    fn apply_swap(&self, st: &mut MomStats, _labels: &[usize], i: usize, g: usize, h: usize) {
        let p = self.data.p();
        for &(j, x) in self.data.row(i) {
            st.sums[g * p + j as usize] -= x;
            st.sums[h * p + j as usize] += x;
        }
        st.totals[g] -= self.totals[i];
        st.totals[h] += self.totals[i];
        st.sizes[g] -= 1;
        st.sizes[h] += 1;
        self.refresh(st, g);
        self.refresh(st, h);
    }

    fn remove_cluster(&self, st: &mut MomStats, c: usize) {
        remove_block(&mut st.sums, self.data.p(), c);
        st.sizes.remove(c);
        st.totals.remove(c);
        st.terms.remove(c);
        st.k -= 1;
    }

    fn delta_merge(&self, st: &MomStats, g: usize, h: usize) -> f64 {
        let p = self.data.p();
        let sums: Vec<u64> = (0..p).map(|j| st.sums[g * p + j] + st.sums[h * p + j]).collect();
        self.cluster_term(st.sizes[g] + st.sizes[h], &sums, st.totals[g] + st.totals[h]) - st.terms[g] - st.terms[h]
    }

    fn apply_merge(&self, st: &mut MomStats, g: usize, h: usize) {
        let p = self.data.p();
        for j in 0..p {
            st.sums[g * p + j] += st.sums[h * p + j];
        }
        st.totals[g] += st.totals[h];
        st.sizes[g] += st.sizes[h];
        st.sizes[h] = 0;
        self.refresh(st, g);
        self.remove_cluster(st, h);
    }

    fn map_estimates(&self, st: &MomStats) -> ModelParams {
        let p = self.data.p();
        let beta = self.prior.beta;
        let theta = (0..st.k)
            .map(|c| {
                let post: Vec<f64> = st.sums[c * p..(c + 1) * p].iter().map(|&t| beta + t as f64).collect();
                dirichlet_point(&post)
            })
            .collect();
        ModelParams::Mom { theta }
    }

    fn prior(&self) -> ModelPrior {
        ModelPrior::Mom(self.prior)
    }
}
