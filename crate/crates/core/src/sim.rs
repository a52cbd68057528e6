//! Samplers for planted-partition data.
//!
//! Labels are drawn one object at a time by inverse CDF on the proportions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CategoricalData, ContinuousData, Graph};
use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-9;

fn check_simplex(what: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::config(format!("{what} is empty")));
    }
    if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::config(format!("{what} has entries outside [0, 1]")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::config(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// Index of the first cumulative proportion exceeding a uniform draw.
pub fn draw_label<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in pi.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left the cumulative sum just below one.
    pi.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn draw_labels<R: Rng + ?Sized>(n: usize, pi: &[f64], rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| draw_label(pi, rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub n: usize,
    pub pi: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    #[serde(default)]
    pub directed: bool,
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        check_simplex("pi", &self.pi)?;
        let k = self.pi.len();
        if self.theta.len() != k || self.theta.iter().any(|r| r.len() != k) {
            return Err(Error::config(format!("theta must be {k} x {k}")));
        }
        for (a, row) in self.theta.iter().enumerate() {
            for (b, &t) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::config(format!("theta[{a}][{b}] = {t} is not a probability")));
                }
                if !self.directed && t != self.theta[b][a] {
                    return Err(Error::config("theta must be symmetric for an undirected graph"));
                }
            }
        }
        Ok(())
    }
}

/// Planted-partition graph without self-loops.
pub fn rsbm<R: Rng + ?Sized>(spec: &SbmSpec, rng: &mut R) -> Result<(Graph, Vec<usize>)> {
    spec.validate()?;
    let n = spec.n;
    let z = draw_labels(n, &spec.pi, rng);
    let mut edges = Vec::new();
    for i in 0..n {
        let lo = if spec.directed { 0 } else { i + 1 };
        for j in lo..n {
            if i == j {
                continue;
            }
            let t = spec.theta[z[i]][z[j]];
            if t > 0.0 && rng.random::<f64>() < t {
                edges.push((i, j));
            }
        }
    }
    let (g, _) = Graph::from_edges(n, edges, spec.directed)?;
    Ok((g, z))
}

/// Same law as [`rsbm`], drawn by geometric skips over each block pair so
/// the cost is linear in nodes plus edges. Draw order differs from `rsbm`.
pub fn rsbm_sparse<R: Rng + ?Sized>(spec: &SbmSpec, rng: &mut R) -> Result<(Graph, Vec<usize>)> {
    spec.validate()?;
    let k = spec.pi.len();
    let z = draw_labels(spec.n, &spec.pi, rng);
    let mut members = vec![Vec::new(); k];
    for (i, &c) in z.iter().enumerate() {
        members[c].push(i);
    }
    let mut edges = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if !spec.directed && b < a {
                continue;
            }
            let (ma, mb) = (&members[a], &members[b]);
            let s = ma.len();
            let total = match (a == b, spec.directed) {
                (true, false) => s * s.saturating_sub(1) / 2,
                (true, true) => s * s.saturating_sub(1),
                (false, _) => s * mb.len(),
            };
            // Row-major pair index to object pair; rows advance monotonically.
            let mut row = 0usize;
            let mut row_start = 0usize;
            let row_len = |r: usize| match (a == b, spec.directed) {
                (true, false) => s - 1 - r,
                (true, true) => s - 1,
                (false, _) => mb.len(),
            };
            for t in skip_indices(total, spec.theta[a][b], rng) {
                while t >= row_start + row_len(row) {
                    row_start += row_len(row);
                    row += 1;
                }
                let off = t - row_start;
                let col = match (a == b, spec.directed) {
                    (true, false) => row + 1 + off,
                    (true, true) => off + usize::from(off >= row),
                    (false, _) => off,
                };
                edges.push((ma[row], mb[col]));
            }
        }
    }
    let (g, _) = Graph::from_edges(spec.n, edges, spec.directed)?;
    Ok((g, z))
}

/// Indices in `0..total` kept independently with probability `p`.
fn skip_indices<R: Rng + ?Sized>(total: usize, p: f64, rng: &mut R) -> Vec<usize> {
    if p <= 0.0 || total == 0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return (0..total).collect();
    }
    let log_q = (-p).ln_1p();
    let mut out = Vec::new();
    let mut t = 0usize;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_q).floor();
        if skip >= (total - t) as f64 {
            break;
        }
        t += skip as usize;
        out.push(t);
        t += 1;
        if t >= total {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub n: usize,
    pub pi: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

impl GmmSpec {
    pub fn p(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        check_simplex("pi", &self.pi)?;
        let k = self.pi.len();
        let p = self.p();
        if p == 0 {
            return Err(Error::config("means must have at least one dimension"));
        }
        if self.means.len() != k || self.means.iter().any(|m| m.len() != p) {
            return Err(Error::config(format!("means must be {k} x {p}")));
        }
        if self.covariances.len() != k {
            return Err(Error::config(format!("expected {k} covariance matrices")));
        }
        for c in 0..k {
            self.root(c)?;
        }
        Ok(())
    }

    /// A square root `L` with `L Lᵀ = Σ_c`; positive semi-definite input is accepted.
    fn root(&self, c: usize) -> Result<DMatrix<f64>> {
        let p = self.p();
        let s = &self.covariances[c];
        if s.len() != p || s.iter().any(|r| r.len() != p) {
            return Err(Error::config(format!("covariance {c} must be {p} x {p}")));
        }
        let m = DMatrix::from_fn(p, p, |a, b| s[a][b]);
        let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(f64::MIN_POSITIVE);
        if m.iter().any(|x| !x.is_finite()) || (&m - m.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::config(format!("covariance {c} must be finite and symmetric")));
        }
        let eig = SymmetricEigen::new(m);
        if eig.eigenvalues.min() < -1e-10 * scale {
            return Err(Error::config(format!("covariance {c} is not positive semi-definite")));
        }
        let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
    }
}

pub fn rgmm<R: Rng + ?Sized>(spec: &GmmSpec, rng: &mut R) -> Result<(ContinuousData, Vec<usize>)> {
    spec.validate()?;
    let p = spec.p();
    let roots: Vec<DMatrix<f64>> = (0..spec.pi.len()).map(|c| spec.root(c)).collect::<Result<_>>()?;
    let z = draw_labels(spec.n, &spec.pi, rng);
    let mut values = Vec::with_capacity(spec.n * p);
    for &c in &z {
        let e = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
        let x = &roots[c] * e;
        values.extend((0..p).map(|j| spec.means[c][j] + x[j]));
    }
    let names = (0..p).map(|j| format!("x{j}")).collect();
    let data = ContinuousData::new(names, spec.n, values)?;
    Ok((data, z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcaSpec {
    pub n: usize,
    pub pi: Vec<f64>,
    /// `theta[k][j][c]`: probability of modality `c` of variable `j` in cluster `k`.
    pub theta: Vec<Vec<Vec<f64>>>,
}

impl LcaSpec {
    pub fn validate(&self) -> Result<()> {
        check_simplex("pi", &self.pi)?;
        let k = self.pi.len();
        if self.theta.len() != k {
            return Err(Error::config(format!("theta must have {k} clusters")));
        }
        let arities: Vec<usize> = self.theta[0].iter().map(Vec::len).collect();
        if arities.is_empty() {
            return Err(Error::config("theta must have at least one variable"));
        }
        for (c, vars) in self.theta.iter().enumerate() {
            if vars.iter().map(Vec::len).collect::<Vec<_>>() != arities {
                return Err(Error::config("every cluster needs the same variables and modalities"));
            }
            for (j, probs) in vars.iter().enumerate() {
                check_simplex(&format!("theta[{c}][{j}]"), probs)?;
            }
        }
        Ok(())
    }
}

pub fn rlca<R: Rng + ?Sized>(spec: &LcaSpec, rng: &mut R) -> Result<(CategoricalData, Vec<usize>)> {
    spec.validate()?;
    let arities: Vec<usize> = spec.theta[0].iter().map(Vec::len).collect();
    let z = draw_labels(spec.n, &spec.pi, rng);
    let rows: Vec<Vec<u32>> = z
        .iter()
        .map(|&c| spec.theta[c].iter().map(|probs| draw_label(probs, rng) as u32).collect())
        .collect();
    Ok((CategoricalData::from_codes(&arities, &rows)?, z))
}

/// Any simulation recipe, tagged by model name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SimSpec {
    Sbm(SbmSpec),
    Gmm(GmmSpec),
    Lca(LcaSpec),
}
