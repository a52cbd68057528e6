//! Full-covariance Gaussian mixture with a Normal-inverse-Wishart prior.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{remove_block, ModelParams, ModelPrior, ObservationModel};
use crate::data::ContinuousData;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::special::ln_multigamma;

/// `μ_k | Σ_k ~ N(mu, Σ_k / tau)` and `Σ_k^{-1} ~ Wishart(epsilon^{-1}, n0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmPrior {
    pub mu: Vec<f64>,
    pub tau: f64,
    pub n0: f64,
    /// Row-major `p × p` scale matrix.
    pub epsilon: Vec<Vec<f64>>,
}

impl GmmPrior {
    pub fn p(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if p == 0 {
            return Err(Error::config("gmm prior needs at least one dimension"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.n0 >= p as f64 && self.n0.is_finite()) {
            return Err(Error::config(format!("n0 must be at least p = {p}, got {}", self.n0)));
        }
        if self.mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("mu must be finite"));
        }
        if self.epsilon.len() != p || self.epsilon.iter().any(|r| r.len() != p) {
            return Err(Error::config(format!("epsilon must be {p} x {p}")));
        }
        for a in 0..p {
            for b in 0..a {
                let (x, y) = (self.epsilon[a][b], self.epsilon[b][a]);
                if (x - y).abs() > 1e-12 * (x.abs() + y.abs()).max(1.0) {
                    return Err(Error::config("epsilon must be symmetric"));
                }
            }
        }
        if self.epsilon_matrix().cholesky().is_none() {
            return Err(Error::config("epsilon must be positive definite"));
        }
        Ok(())
    }

    fn epsilon_matrix(&self) -> DMatrix<f64> {
        let p = self.p();
        DMatrix::from_fn(p, p, |a, b| self.epsilon[a][b])
    }
}

#[derive(Debug, Clone)]
pub struct GmmModel {
    prior: GmmPrior,
    p: usize,
    /// Data shifted by the prior mean, row-major.
    centered: Vec<f64>,
    epsilon: Vec<f64>,
    ln_det_eps: f64,
    ln_mgamma_n0: f64,
}

/// Per-cluster counts, sums and raw second moments of the centered data.
#[derive(Debug, Clone)]
pub struct GmmStats {
    k: usize,
    sizes: Vec<u64>,
    sums: Vec<f64>,
    outer: Vec<f64>,
    terms: Vec<f64>,
}

impl GmmStats {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    /// Sum of centered points in cluster `c`.
    pub fn sum(&self, c: usize) -> &[f64] {
        let p = self.sums.len() / self.k.max(1);
        &self.sums[c * p..(c + 1) * p]
    }
}

/// `ln |A|` of a symmetric matrix via Cholesky, with one jittered retry.
fn ln_det_spd(a: &[f64], p: usize) -> Option<f64> {
    let m = DMatrix::from_row_slice(p, p, a);
    let chol = match m.clone().cholesky() {
        Some(c) => c,
        None => {
            let trace: f64 = (0..p).map(|j| m[(j, j)]).sum();
            let jitter = 1e-10 * trace.abs() / p as f64;
            warn!("posterior scale not positive definite; adding jitter {jitter:e}");
            let mut j = m;
            for d in 0..p {
                j[(d, d)] += jitter;
            }
            j.cholesky()?
        }
    };
    let l = chol.l_dirty();
    Some(2.0 * (0..p).map(|d| l[(d, d)].ln()).sum::<f64>())
}

impl GmmModel {
    pub fn new(prior: GmmPrior, data: ContinuousData) -> Result<Self> {
        prior.validate()?;
        let p = prior.p();
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
        let epsilon: Vec<f64> = prior.epsilon.iter().flatten().copied().collect();
        let ln_det_eps = ln_det_spd(&epsilon, p).expect("validated positive definite");
        let ln_mgamma_n0 = ln_multigamma(p, prior.n0 / 2.0);
        Ok(GmmModel {
            prior,
            p,
            centered,
            epsilon,
            ln_det_eps,
            ln_mgamma_n0,
        })
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.centered[i * self.p..(i + 1) * self.p]
    }

    /// Posterior scale `ε + M − s sᵀ / (τ + n)`.
    fn posterior_scale(&self, n: u64, s: &[f64], m: &[f64]) -> Vec<f64> {
        let p = self.p;
        let denom = self.prior.tau + n as f64;
        let mut out = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..p {
                out[a * p + b] = self.epsilon[a * p + b] + m[a * p + b] - s[a] * s[b] / denom;
            }
        }
        out
    }

    /// Collapsed log marginal of one cluster; NaN when factorization fails.
    fn cluster_term(&self, n: u64, s: &[f64], m: &[f64]) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let p = self.p as f64;
        let nf = n as f64;
        let scale = self.posterior_scale(n, s, m);
        let Some(ln_det) = ln_det_spd(&scale, self.p) else {
            return f64::NAN;
        };
        let n0 = self.prior.n0;
        let tau = self.prior.tau;
        -(nf * p / 2.0) * std::f64::consts::PI.ln() + ln_multigamma(self.p, (n0 + nf) / 2.0)
            - self.ln_mgamma_n0
            + (n0 / 2.0) * self.ln_det_eps
            - ((n0 + nf) / 2.0) * ln_det
            + (p / 2.0) * (tau.ln() - (tau + nf).ln())
    }

    /// Term of cluster `c` after adding (`sign = 1`) or removing (`-1`) point `i`.
    fn term_with(&self, st: &GmmStats, c: usize, i: usize, sign: f64) -> f64 {
        let p = self.p;
        let x = self.point(i);
        let n = if sign > 0.0 { st.sizes[c] + 1 } else { st.sizes[c] - 1 };
        let s: Vec<f64> = (0..p).map(|a| st.sums[c * p + a] + sign * x[a]).collect();
        let mut m = st.outer[c * p * p..(c + 1) * p * p].to_vec();
        for a in 0..p {
            for b in 0..p {
                m[a * p + b] += sign * x[a] * x[b];
            }
        }
        self.cluster_term(n, &s, &m)
    }

    fn refresh(&self, st: &mut GmmStats, c: usize) {
        let p = self.p;
        st.terms[c] = self.cluster_term(
            st.sizes[c],
            &st.sums[c * p..(c + 1) * p],
            &st.outer[c * p * p..(c + 1) * p * p],
        );
    }

    fn accumulate(&self, st: &mut GmmStats, c: usize, i: usize, sign: f64) {
        let p = self.p;
        let x = &self.centered[i * p..(i + 1) * p];
        for a in 0..p {
            st.sums[c * p + a] += sign * x[a];
            for b in 0..p {
                st.outer[c * p * p + a * p + b] += sign * x[a] * x[b];
            }
        }
    }
}

impl ObservationModel for GmmModel {
    type Stats = GmmStats;

    fn n(&self) -> usize {
        self.centered.len() / self.p
    }

    fn init_stats(&self, partition: &Partition) -> GmmStats {
        let (k, p) = (partition.k(), self.p);
        let mut st = GmmStats {
            k,
            sizes: partition.sizes().iter().map(|&x| x as u64).collect(),
            sums: vec![0.0; k * p],
            outer: vec![0.0; k * p * p],
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

    fn log_marginal(&self, st: &GmmStats) -> Result<f64> {
        let mut acc = 0.0;
        for (c, &t) in st.terms.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Numerical {
                    cluster: c,
                    reason: "posterior scale matrix is not positive definite".into(),
                });
            }
            acc += t;
        }
        Ok(acc)
    }

    fn delta_swap(&self, st: &GmmStats, _labels: &[usize], i: usize, g: usize, h: usize) -> f64 {
        self.term_with(st, g, i, -1.0) - st.terms[g] + self.term_with(st, h, i, 1.0) - st.terms[h]
    }

    fn swap_deltas(&self, st: &GmmStats, labels: &[usize], i: usize, out: &mut [f64]) {
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

    fn apply_swap(&self, st: &mut GmmStats, _labels: &[usize], i: usize, g: usize, h: usize) {
        self.accumulate(st, g, i, -1.0);
        self.accumulate(st, h, i, 1.0);
        st.sizes[g] -= 1;
        st.sizes[h] += 1;
        if st.sizes[g] == 0 {
            // Clear rounding residue so an emptied cluster is exactly zero.
            let p = self.p;
            st.sums[g * p..(g + 1) * p].fill(0.0);
            st.outer[g * p * p..(g + 1) * p * p].fill(0.0);
        }
        self.refresh(st, g);
        self.refresh(st, h);
    }

    fn remove_cluster(&self, st: &mut GmmStats, c: usize) {
        let p = self.p;
        remove_block(&mut st.sums, p, c);
        remove_block(&mut st.outer, p * p, c);
        st.sizes.remove(c);
        st.terms.remove(c);
        st.k -= 1;
    }

    fn delta_merge(&self, st: &GmmStats, g: usize, h: usize) -> f64 {
        let p = self.p;
        let s: Vec<f64> = (0..p).map(|a| st.sums[g * p + a] + st.sums[h * p + a]).collect();
        let m: Vec<f64> = (0..p * p)
            .map(|a| st.outer[g * p * p + a] + st.outer[h * p * p + a])
            .collect();
        self.cluster_term(st.sizes[g] + st.sizes[h], &s, &m) - st.terms[g] - st.terms[h]
    }

    fn apply_merge(&self, st: &mut GmmStats, g: usize, h: usize) {
        let p = self.p;
        for a in 0..p {
            st.sums[g * p + a] += st.sums[h * p + a];
        }
        for a in 0..p * p {
            st.outer[g * p * p + a] += st.outer[h * p * p + a];
        }
        st.sizes[g] += st.sizes[h];
        st.sizes[h] = 0;
        self.refresh(st, g);
        self.remove_cluster(st, h);
    }

    fn map_estimates(&self, st: &GmmStats) -> ModelParams {
        let p = self.p;
        let mut means = Vec::with_capacity(st.k);
        let mut covariances = Vec::with_capacity(st.k);
        for c in 0..st.k {
            let n = st.sizes[c];
            let s = &st.sums[c * p..(c + 1) * p];
            let denom = self.prior.tau + n as f64;
            means.push((0..p).map(|a| self.prior.mu[a] + s[a] / denom).collect());
            let scale = self.posterior_scale(n, s, &st.outer[c * p * p..(c + 1) * p * p]);
            // Mode of the inverse-Wishart posterior on Σ_k.
            let dof = self.prior.n0 + n as f64 + p as f64 + 1.0;
            covariances.push((0..p).map(|a| (0..p).map(|b| scale[a * p + b] / dof).collect()).collect());
        }
        ModelParams::Gmm { means, covariances }
    }

    fn prior(&self) -> ModelPrior {
        ModelPrior::Gmm(self.prior.clone())
    }
}
