//! Log-space special functions shared by the collapsed marginals.

use std::f64::consts::PI;

pub use statrs::function::gamma::ln_gamma;

/// `ln B(a, b)`.
#[inline]
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log of the multivariate gamma function `Γ_p(a)`.
pub fn ln_multigamma(p: usize, a: f64) -> f64 {
    let pf = p as f64;
    let mut acc = pf * (pf - 1.0) / 4.0 * PI.ln();
    for j in 0..p {
        acc += ln_gamma(a - j as f64 / 2.0);
    }
    acc
}

/// `ln Γ(x + k) - ln Γ(x)` for a non-negative integer `k`.
///
/// Small increments are accumulated as a product of logs, which is
/// more accurate than differencing two large log-gamma values.
#[inline]
pub fn ln_rising(x: f64, k: u64) -> f64 {
    if k <= 8 {
        let mut acc = 0.0;
        for j in 0..k {
            acc += (x + j as f64).ln();
        }
        acc
    } else {
        ln_gamma(x + k as f64) - ln_gamma(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_small_integers() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn ln_beta_uniform() {
        assert!(ln_beta(1.0, 1.0).abs() < 1e-14);
        assert!((ln_beta(2.0, 1.0) - 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn multigamma_p1_is_gamma() {
        assert!((ln_multigamma(1, 3.7) - ln_gamma(3.7)).abs() < 1e-14);
    }

    #[test]
    fn rising_matches_gamma_difference() {
        for &(x, k) in &[(0.5, 0u64), (0.5, 3), (2.25, 8), (1.0, 40)] {
            let want = ln_gamma(x + k as f64) - ln_gamma(x);
            assert!((ln_rising(x, k) - want).abs() < 1e-11, "{x} {k}");
        }
    }
}
