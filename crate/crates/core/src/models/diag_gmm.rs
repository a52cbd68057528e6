//! Gaussian mixture with diagonal covariances and Normal-Gamma priors per dimension.

use serde::{Deserialize, Serialize};

use super::{remove_block, ModelParams, ModelPrior, ObservationModel};
use crate::data::ContinuousData;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::special::ln_gamma;

/// Per dimension `j`: `1/σ²_kj ~ Gamma(kappa, beta_j)` and `μ_kj | σ²_kj ~ N(mu_j, σ²_kj / tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGmmPrior {
    pub mu: Vec<f64>,
    pub tau: f64,
    pub kappa: f64,
    pub beta: Vec<f64>,
}

impl DiagGmmPrior {
    pub fn validate(&self) -> Result<()> {
        if self.mu.is_empty() || self.mu.len() != self.beta.len() {
            return Err(Error::config("diag-gmm prior needs mu and beta of equal, non-zero length"));
        }
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.tau) || !pos(self.kappa) || !self.beta.iter().all(|&b| pos(b)) {
            return Err(Error::config("diag-gmm prior needs tau, kappa and beta positive"));
        }
        if self.mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("mu must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DiagGmmModel {
    prior: DiagGmmPrior,
    p: usize,
    centered: Vec<f64>,
    ln_gamma_kappa: f64,
    kappa_ln_beta: Vec<f64>,
}

/// Per-cluster counts, sums and sums of squares of the centered data.
#[derive(Debug, Clone)]
pub struct DiagGmmStats {
    k: usize,
    sizes: Vec<u64>,
    sums: Vec<f64>,
    squares: Vec<f64>,
    terms: Vec<f64>,
}

impl DiagGmmModel {
    pub fn new(prior: DiagGmmPrior, data: ContinuousData) -> Result<Self> {
        prior.validate()?;
        let p = prior.mu.len();
        if data.p() != p {
            return Err(Error::data(format!("data has {} columns, prior expects {p}", data.p())));
        }
        if data.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::data("continuous data must be finite"));
        }
        let mut centered = data.values().to_vec();
        for row in centered.chunks_mut(p) {
            for (x, m) in row.iter_mut().zip(&prior.mu) {
                *x -= m;
            }
        }
        let ln_gamma_kappa = ln_gamma(prior.kappa);
        let kappa_ln_beta = prior.beta.iter().map(|b| prior.kappa * b.ln()).collect();
        Ok(DiagGmmModel {
            prior,
            p,
            centered,
            ln_gamma_kappa,
            kappa_ln_beta,
        })
    }

    fn cluster_term(&self, n: u64, s: &[f64], q: &[f64]) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let nf = n as f64;
        let tau = self.prior.tau;
        let kappa_n = self.prior.kappa + nf / 2.0;
        let per_dim = ln_gamma(kappa_n) - self.ln_gamma_kappa + 0.5 * (tau.ln() - (tau + nf).ln())
            - nf / 2.0 * (2.0 * std::f64::consts::PI).ln();
        let mut acc = per_dim * self.p as f64;
        for j in 0..self.p {
            let beta_n = self.prior.beta[j] + 0.5 * (q[j] - s[j] * s[j] / (tau + nf));
            acc += self.kappa_ln_beta[j] - kappa_n * beta_n.ln();
        }
        acc
    }

    fn term_with(&self, st: &DiagGmmStats, c: usize, i: usize, sign: f64) -> f64 {
        let p = self.p;
        let x = &self.centered[i * p..(i + 1) * p];
        let n = if sign > 0.0 { st.sizes[c] + 1 } else { st.sizes[c] - 1 };
        let s: Vec<f64> = (0..p).map(|j| st.sums[c * p + j] + sign * x[j]).collect();
        let q: Vec<f64> = (0..p).map(|j| st.squares[c * p + j] + sign * x[j] * x[j]).collect();
        self.cluster_term(n, &s, &q)
    }

    fn refresh(&self, st: &mut DiagGmmStats, c: usize) {
        let p = self.p;
        st.terms[c] = self.cluster_term(st.sizes[c], &st.sums[c * p..(c + 1) * p], &st.squares[c * p..(c + 1) * p]);
    }

    fn accumulate(&self, st: &mut DiagGmmStats, c: usize, i: usize, sign: f64) {
        let p = self.p;
        for j in 0..p {
            let x = self.centered[i * p + j];
            st.sums[c * p + j] += sign * x;
            st.squares[c * p + j] += sign * x * x;
        }
    }
}

impl ObservationModel for DiagGmmModel {
    type Stats = DiagGmmStats;

    fn n(&self) -> usize {
        self.centered.len() / self.p
    }

    fn init_stats(&self, partition: &Partition) -> DiagGmmStats {
        let (k, p) = (partition.k(), self.p);
        let mut st = DiagGmmStats {
            k,
            sizes: partition.sizes().iter().map(|&x| x as u64).collect(),
            sums: vec![0.0; k * p],
            squares: vec![0.0; k * p],
            terms: vec![0.0; k],
        };
        for (i, &c) in partition.labels().iter().enumerate() {
            self.accumulate(&mut st, c, i, 1.0);
        }
        for c in 0..k {
            self.refresh(&mut st, c);
        }
        st
    }

    fn log_marginal(&self, st: &DiagGmmStats) -> Result<f64> {
        let mut acc = 0.0;
        for (c, &t) in st.terms.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Numerical {
                    cluster: c,
                    reason: "non-finite posterior rate".into(),
                });
            }
            acc += t;
        }
        Ok(acc)
    }

    fn delta_swap(&self, st: &DiagGmmStats, _labels: &[usize], i: usize, g: usize, h: usize) -> f64 {
        self.term_with(st, g, i, -1.0) - st.terms[g] + self.term_with(st, h, i, 1.0) - st.terms[h]
    }

    fn swap_deltas(&self, st: &DiagGmmStats, labels: &[usize], i: usize, out: &mut [f64]) {
        let g = labels[i];
        let leave = self.term_with(st, g, i, -1.0) - st.terms[g];
        for (h, slot) in out.iter_mut().enumerate() {
            *slot = if h == g {
                0.0
            } else {
                leave + self.term_with(st, h, i, 1.0) - st.terms[h]
            };
        }
    }

    fn apply_swap(&self, st: &mut DiagGmmStats, _labels: &[usize], i: usize, g: usize, h: usize) {
        self.accumulate(st, g, i, -1.0);
        self.accumulate(st, h, i, 1.0);
        st.sizes[g] -= 1;
        st.sizes[h] += 1;
        if st.sizes[g] == 0 {
            let p = self.p;
            st.sums[g * p..(g + 1) * p].fill(0.0);
            st.squares[g * p..(g + 1) * p].fill(0.0);
        }
        self.refresh(st, g);
        self.refresh(st, h);
    }

    fn remove_cluster(&self, st: &mut DiagGmmStats, c: usize) {
        remove_block(&mut st.sums, self.p, c);
        remove_block(&mut st.squares, self.p, c);
        st.sizes.remove(c);
        st.terms.remove(c);
        st.k -= 1;
    }

    fn delta_merge(&self, st: &DiagGmmStats, g: usize, h: usize) -> f64 {
        let p = self.p;
        let s: Vec<f64> = (0..p).map(|j| st.sums[g * p + j] + st.sums[h * p + j]).collect();
        let q: Vec<f64> = (0..p).map(|j| st.squares[g * p + j] + st.squares[h * p + j]).collect();
        self.cluster_term(st.sizes[g] + st.sizes[h], &s, &q) - st.terms[g] - st.terms[h]
    }

    fn apply_merge(&self, st: &mut DiagGmmStats, g: usize, h: usize) {
        let p = self.p;
        for j in 0..p {
            st.sums[g * p + j] += st.sums[h * p + j];
            st.squares[g * p + j] += st.squares[h * p + j];
        }
        st.sizes[g] += st.sizes[h];
        st.sizes[h] = 0;
        self.refresh(st, g);
        self.remove_cluster(st, h);
    }

    fn map_estimates(&self, st: &DiagGmmStats) -> ModelParams {
        let p = self.p;
        let tau = self.prior.tau;
        let mut means = Vec::with_capacity(st.k);
        let mut variances = Vec::with_capacity(st.k);
        for c in 0..st.k {
            let nf = st.sizes[c] as f64;
            let kappa_n = self.prior.kappa + nf / 2.0;
            let mut m = Vec::with_capacity(p);
            let mut v = Vec::with_capacity(p);
            for j in 0..p {
                let s = st.sums[c * p + j];
                let q = st.squares[c * p + j];
                m.push(self.prior.mu[j] + s / (tau + nf));
                let beta_n = self.prior.beta[j] + 0.5 * (q - s * s / (tau + nf));
                // Mode of the inverse-gamma posterior on σ².
                v.push(beta_n / (kappa_n + 1.0));
            }
            means.push(m);
            variances.push(v);
        }
        ModelParams::DiagGmm { means, variances }
    }

    fn prior(&self) -> ModelPrior {
        ModelPrior::DiagGmm(self.prior.clone())
    }
}
