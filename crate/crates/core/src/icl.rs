//! The Dirichlet-multinomial partition term and assembly of the exact ICL.
//!
//! With a symmetric `Dirichlet(α)` prior on the cluster proportions, the
//! proportions integrate out in closed form:
//!
//! ```text
//! log p(Z | α) = ln Γ(Kα) − K ln Γ(α) − ln Γ(n + Kα) + Σ_k ln Γ(α + n_k)
//! ```
//!
//! Everything stays in log-gamma space; nothing is exponentiated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Symmetric Dirichlet concentration over the cluster proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharedPrior {
    alpha: f64,
}

impl SharedPrior {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be positive, got {alpha}")));
        }
        Ok(SharedPrior { alpha })
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for SharedPrior {
    fn default() -> Self {
        SharedPrior { alpha: 1.0 }
    }
}

/// Exact ICL split into its observational and partition terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IclValue {
    pub obs: f64,
    pub partition: f64,
    pub total: f64,
}

impl IclValue {
    pub fn new(obs: f64, partition: f64) -> Self {
        IclValue {
            obs,
            partition,
            total: obs + partition,
        }
    }
}

/// `log p(Z | α)` for the given cluster sizes.
pub fn log_partition_term(sizes: &[usize], alpha: f64, n: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    if sizes.contains(&0) {
        return Err(Error::domain("cluster sizes must be positive"));
    }
    let total: usize = sizes.iter().sum();
    if total != n {
        return Err(Error::domain(format!("sizes sum to {total}, expected n = {n}")));
    }
    Ok(partition_term_unchecked(sizes, alpha))
}

pub(crate) fn partition_term_unchecked(sizes: &[usize], alpha: f64) -> f64 {
    let k = sizes.len() as f64;
    let n: usize = sizes.iter().sum();
    let mut acc = ln_gamma(k * alpha) - k * ln_gamma(alpha) - ln_gamma(n as f64 + k * alpha);
    for &s in sizes {
        acc += ln_gamma(alpha + s as f64);
    }
    acc
}

/// `ln Γ(e^lx)`, still accurate when `e^lx` underflows.
fn ln_gamma_of_exp(lx: f64) -> f64 {
    if lx < -20.0 {
        // ln Γ(x) = −ln x − γx + (π²/12)x² + O(x³)
        let x = lx.exp();
        let euler = 0.577_215_664_901_532_9;
        -lx - euler * x + std::f64::consts::PI.powi(2) / 12.0 * x * x
    } else {
        ln_gamma(lx.exp())
    }
}

/// Partition term for a concentration given by its logarithm, so that
/// concentrations far below the smallest positive double stay usable.
pub fn partition_term_ln_alpha(sizes: &[usize], ln_alpha: f64) -> f64 {
    let k = sizes.len() as f64;
    let n: usize = sizes.iter().sum();
    let alpha = ln_alpha.exp();
    let mut acc = ln_gamma_of_exp(k.ln() + ln_alpha) - k * ln_gamma_of_exp(ln_alpha) - ln_gamma(n as f64 + k * alpha);
    for &s in sizes {
        acc += ln_gamma(alpha + s as f64);
    }
    acc
}

/// Combines an observational term with the partition term.
pub fn assemble_icl(obs: f64, sizes: &[usize], alpha: f64) -> Result<IclValue> {
    if !obs.is_finite() {
        return Err(Error::domain(format!("observational term is not finite: {obs}")));
    }
    let n = sizes.iter().sum();
    let part = log_partition_term(sizes, alpha, n)?;
    Ok(IclValue::new(obs, part))
}

/// Change in the partition term when one object moves from a cluster of
/// size `n_from` to one of size `n_to` (the source vanishes when `n_from == 1`).
pub(crate) fn swap_partition_delta(n_from: usize, n_to: usize, k: usize, n: usize, alpha: f64) -> f64 {
    let gain = (alpha + n_to as f64).ln();
    if n_from > 1 {
        gain - (alpha + n_from as f64 - 1.0).ln()
    } else {
        // K -> K-1 and the Γ(α + 1) factor of the vanished cluster disappears.
        let kf = k as f64;
        let nf = n as f64;
        gain + ln_gamma((kf - 1.0) * alpha) - ln_gamma(kf * alpha) + ln_gamma(alpha)
            - ln_gamma(nf + (kf - 1.0) * alpha)
            + ln_gamma(nf + kf * alpha)
            - ln_gamma(alpha + 1.0)
    }
}

/// Change in the partition term when clusters of sizes `n_g` and `n_h` fuse.
pub(crate) fn merge_partition_delta(n_g: usize, n_h: usize, k: usize, n: usize, alpha: f64) -> f64 {
    let kf = k as f64;
    let nf = n as f64;
    ln_gamma((kf - 1.0) * alpha) - ln_gamma(kf * alpha) + ln_gamma(alpha)
        - ln_gamma(nf + (kf - 1.0) * alpha)
        + ln_gamma(nf + kf * alpha)
        + ln_gamma(alpha + (n_g + n_h) as f64)
        - ln_gamma(alpha + n_g as f64)
        - ln_gamma(alpha + n_h as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Product of sequential predictives p(z_i = k | z_<i) = (α + n_k^{<i}) / (i − 1 + Kα).
    fn sequential_oracle(labels: &[usize], k: usize, alpha: f64) -> f64 {
        let mut counts = vec![0usize; k];
        let mut acc = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            acc += ((alpha + counts[l] as f64) / (i as f64 + k as f64 * alpha)).ln();
            counts[l] += 1;
        }
        acc
    }

    #[test]
    fn single_cluster_is_zero() {
        assert!(log_partition_term(&[2], 1.0, 2).unwrap().abs() < 1e-15);
    }

    #[test]
    fn two_singletons_alpha_one() {
        let v = log_partition_term(&[1, 1], 1.0, 2).unwrap();
        assert!((v - (1.0f64 / 6.0).ln()).abs() < 1e-12);
        assert!((v + 1.791759).abs() < 1e-6);
    }

    #[test]
    fn three_one_half_matches_oracle() {
        // Frozen from the sequential oracle on labels [0,0,0,1]:
        // (.5/1)(1.5/2)(2.5/3)(.5/4) = 0.0390625
        let oracle = sequential_oracle(&[0, 0, 0, 1], 2, 0.5);
        assert!((oracle - 0.0390625f64.ln()).abs() < 1e-14);
        let v = log_partition_term(&[3, 1], 0.5, 4).unwrap();
        assert!((v - 0.0390625f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(log_partition_term(&[2, 0], 1.0, 2).is_err());
        assert!(log_partition_term(&[2], 0.0, 2).is_err());
        assert!(log_partition_term(&[2], -1.0, 2).is_err());
        assert!(log_partition_term(&[2], 1.0, 3).is_err());
    }

    #[test]
    fn assemble_examples() {
        let v = assemble_icl(0.0, &[2], 1.0).unwrap();
        assert_eq!(v.total, 0.0);
        let v = assemble_icl(-5.0, &[1, 1], 1.0).unwrap();
        assert!((v.total - (-5.0 + (1.0f64 / 6.0).ln())).abs() < 1e-12);
        assert_eq!(v.total, v.obs + v.partition);
        let a = assemble_icl(-3.0, &[4, 1, 2], 0.7).unwrap();
        let b = assemble_icl(-3.0, &[2, 4, 1], 0.7).unwrap();
        assert!((a.total - b.total).abs() < 1e-12);
        assert!(assemble_icl(f64::NAN, &[1], 1.0).is_err());
    }

    #[test]
    fn swap_delta_matches_recompute() {
        let alpha = 0.7;
        let before = [3usize, 1, 4];
        let after_move = [2usize, 1, 5];
        let d = swap_partition_delta(3, 4, 3, 8, alpha);
        let want = partition_term_unchecked(&after_move, alpha) - partition_term_unchecked(&before, alpha);
        assert!((d - want).abs() < 1e-12);
        // vanishing source
        let d = swap_partition_delta(1, 4, 3, 8, alpha);
        let want = partition_term_unchecked(&[3, 5], alpha) - partition_term_unchecked(&before, alpha);
        assert!((d - want).abs() < 1e-12);
    }

    #[test]
    fn merge_delta_matches_recompute() {
        let alpha = 1.3;
        let d = merge_partition_delta(3, 4, 3, 8, alpha);
        let want = partition_term_unchecked(&[7, 1], alpha) - partition_term_unchecked(&[3, 1, 4], alpha);
        assert!((d - want).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sequential_predictive_equivalence(
            labels in prop::collection::vec(0usize..4, 1..=12),
            alpha_idx in 0usize..4,
        ) {
            let alpha = [0.1, 0.5, 1.0, 2.0][alpha_idx];
            let p = crate::partition::Partition::from_labels(labels);
            let oracle = sequential_oracle(p.labels(), p.k(), alpha);
            let v = log_partition_term(p.sizes(), alpha, p.n()).unwrap();
            prop_assert!((v - oracle).abs() < 1e-10, "{} vs {}", v, oracle);
        }

        #[test]
        fn exchangeable_in_sizes(
            mut sizes in prop::collection::vec(1usize..30, 1..8),
            alpha in 0.05f64..5.0,
            seed in any::<u64>(),
        ) {
            let n = sizes.iter().sum();
            let a = log_partition_term(&sizes, alpha, n).unwrap();
            let len = sizes.len();
            sizes.rotate_left((seed as usize) % len);
            sizes.reverse();
            let b = log_partition_term(&sizes, alpha, n).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn log_alpha_form_agrees_and_extends() {
        let sizes = [5, 3, 9, 1];
        for la in [-25.0f64, -20.5, -19.5, -5.0, 0.0, 1.5] {
            let direct = partition_term_unchecked(&sizes, la.exp());
            let via_log = partition_term_ln_alpha(&sizes, la);
            assert!((direct - via_log).abs() < 1e-9 * direct.abs().max(1.0), "{la}: {direct} {via_log}");
        }
        // Far below underflow the term is (K − 1) ln α − ln K + Σ ln Γ(n_k) − ln Γ(n).
        let la = -5000.0;
        let approx = 3.0 * la - 4f64.ln() + [5.0f64, 3.0, 9.0, 1.0].iter().map(|&s| ln_gamma(s)).sum::<f64>() - ln_gamma(18.0);
        assert!((partition_term_ln_alpha(&sizes, la) - approx).abs() < 1e-9);
    }
}
