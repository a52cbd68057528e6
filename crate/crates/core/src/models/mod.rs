//! Observational models with collapsed (parameter-free) marginals.
//!
//! Every model keeps per-cluster sufficient statistics so that the change of
//! `log p(X | Z, β)` caused by moving one object, or fusing two clusters, can
//! be evaluated without touching the whole dataset.

mod combined;
mod diag_gmm;
mod gmm;
mod lca;
mod mom;
mod prior;
mod sbm;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

pub use combined::{CombinedModel, CombinedStats};
pub use diag_gmm::{DiagGmmModel, DiagGmmPrior, DiagGmmStats};
pub use gmm::{GmmModel, GmmPrior, GmmStats};
pub use lca::{LcaModel, LcaPrior, LcaStats};
pub use mom::{MomModel, MomPrior, MomStats};
pub use prior::{default_prior, detect_kind, ModelKind, ModelPrior, NamedPrior, Overrides};
pub use sbm::{SbmModel, SbmPrior, SbmStats};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Contract shared by all observational models.
///
/// Cluster indices refer to the current (compact) labelling. Index
/// preconditions are the caller's responsibility; `SearchState` checks them
/// on its public surface.
pub trait ObservationModel: Send + Sync {
    type Stats: Clone + Debug + Send + Sync;

    /// Number of objects.
    fn n(&self) -> usize;

    fn init_stats(&self, partition: &Partition) -> Self::Stats;

    /// Exact `log p(X | Z, β)`.
    fn log_marginal(&self, stats: &Self::Stats) -> Result<f64>;

    /// Observational delta of moving `i` from `from` to `to`.
    fn delta_swap(&self, stats: &Self::Stats, labels: &[usize], i: usize, from: usize, to: usize) -> f64;

    /// Deltas of moving `i` to every cluster; `out[labels[i]]` is set to 0.
    fn swap_deltas(&self, stats: &Self::Stats, labels: &[usize], i: usize, out: &mut [f64]) {
        let from = labels[i];
        for (h, slot) in out.iter_mut().enumerate() {
            *slot = if h == from {
                0.0
            } else {
                self.delta_swap(stats, labels, i, from, h)
            };
        }
    }

    /// Updates `stats` for the move; `labels` is the labelling *before* it.
    fn apply_swap(&self, stats: &mut Self::Stats, labels: &[usize], i: usize, from: usize, to: usize);

    /// Drops the statistics of an empty cluster; higher indices shift down.
    fn remove_cluster(&self, stats: &mut Self::Stats, k: usize);

    /// Observational delta of fusing `h` into `g`.
    fn delta_merge(&self, stats: &Self::Stats, g: usize, h: usize) -> f64;

    /// Fuses `h` into `g` and removes `h`.
    fn apply_merge(&self, stats: &mut Self::Stats, g: usize, h: usize);

    /// Point estimates of the integrated parameters given the partition.
    fn map_estimates(&self, stats: &Self::Stats) -> ModelParams;

    /// Hyperparameters, with data-driven values materialized.
    fn prior(&self) -> ModelPrior;
}

/// Posterior point estimates, per model.
///
/// Beta and Dirichlet estimates use the posterior mode when every posterior
/// parameter exceeds one and the posterior mean otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Sbm {
        /// `theta[k][l]`: connection probability from cluster `k` to `l`.
        theta: Vec<Vec<f64>>,
    },
    Gmm {
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
    },
    DiagGmm {
        means: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
    },
    Lca {
        /// `theta[k][j][c]`: probability of modality `c` of variable `j` in cluster `k`.
        theta: Vec<Vec<Vec<f64>>>,
    },
    Mom {
        theta: Vec<Vec<f64>>,
    },
    Combined {
        views: Vec<NamedParams>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedParams {
    pub name: String,
    pub params: ModelParams,
}

/// Mode of a Beta/Dirichlet posterior when all parameters exceed one, else the mean.
pub(crate) fn dirichlet_point(params: &[f64]) -> Vec<f64> {
    let total: f64 = params.iter().sum();
    if params.iter().all(|&a| a > 1.0) {
        let denom = total - params.len() as f64;
        params.iter().map(|a| (a - 1.0) / denom).collect()
    } else {
        params.iter().map(|a| a / total).collect()
    }
}

/// One of the concrete models; used wherever the model is chosen at run time.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Sbm(SbmModel),
    Gmm(GmmModel),
    DiagGmm(DiagGmmModel),
    Lca(LcaModel),
    Mom(MomModel),
    Combined(CombinedModel),
}

#[derive(Debug, Clone)]
pub enum AnyStats {
    Sbm(SbmStats),
    Gmm(GmmStats),
    DiagGmm(DiagGmmStats),
    Lca(LcaStats),
    Mom(MomStats),
    Combined(CombinedStats),
}

impl AnyModel {
    /// Binds a prior to a dataset of the matching shape.
    pub fn build(prior: ModelPrior, data: Dataset) -> Result<AnyModel> {
        Ok(match (prior, data) {
            (ModelPrior::Sbm(p), Dataset::Graph(g)) => AnyModel::Sbm(SbmModel::new(p, g)?),
            (ModelPrior::Gmm(p), Dataset::Continuous(d)) => AnyModel::Gmm(GmmModel::new(p, d)?),
            (ModelPrior::DiagGmm(p), Dataset::Continuous(d)) => AnyModel::DiagGmm(DiagGmmModel::new(p, d)?),
            (ModelPrior::Lca(p), Dataset::Categorical(d)) => AnyModel::Lca(LcaModel::new(p, d)?),
            (ModelPrior::Mom(p), Dataset::Counts(d)) => AnyModel::Mom(MomModel::new(p, d)?),
            (ModelPrior::Combined { views }, Dataset::Views(data)) => {
                AnyModel::Combined(CombinedModel::build(views, data)?)
            }
            (prior, data) => {
                return Err(Error::config(format!(
                    "model {} cannot be fitted on {} data",
                    prior.kind().name(),
                    data.kind_name()
                )))
            }
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Sbm(_) => ModelKind::Sbm,
            AnyModel::Gmm(_) => ModelKind::Gmm,
            AnyModel::DiagGmm(_) => ModelKind::DiagGmm,
            AnyModel::Lca(_) => ModelKind::Lca,
            AnyModel::Mom(_) => ModelKind::Mom,
            AnyModel::Combined(_) => ModelKind::Combined,
        }
    }
}

macro_rules! dispatch {
    ($self:ident, $stats:ident, |$m:ident, $s:ident| $body:expr) => {
        match ($self, $stats) {
            (AnyModel::Sbm($m), AnyStats::Sbm($s)) => $body,
            (AnyModel::Gmm($m), AnyStats::Gmm($s)) => $body,
            (AnyModel::DiagGmm($m), AnyStats::DiagGmm($s)) => $body,
            (AnyModel::Lca($m), AnyStats::Lca($s)) => $body,
            (AnyModel::Mom($m), AnyStats::Mom($s)) => $body,
            (AnyModel::Combined($m), AnyStats::Combined($s)) => $body,
            _ => unreachable!("statistics do not belong to this model"),
        }
    };
}

impl ObservationModel for AnyModel {
    type Stats = AnyStats;

    fn n(&self) -> usize {
        match self {
            AnyModel::Sbm(m) => m.n(),
            AnyModel::Gmm(m) => m.n(),
            AnyModel::DiagGmm(m) => m.n(),
            AnyModel::Lca(m) => m.n(),
            AnyModel::Mom(m) => m.n(),
            AnyModel::Combined(m) => m.n(),
        }
    }

    fn init_stats(&self, partition: &Partition) -> AnyStats {
        match self {
            AnyModel::Sbm(m) => AnyStats::Sbm(m.init_stats(partition)),
            AnyModel::Gmm(m) => AnyStats::Gmm(m.init_stats(partition)),
            AnyModel::DiagGmm(m) => AnyStats::DiagGmm(m.init_stats(partition)),
            AnyModel::Lca(m) => AnyStats::Lca(m.init_stats(partition)),
            AnyModel::Mom(m) => AnyStats::Mom(m.init_stats(partition)),
            AnyModel::Combined(m) => AnyStats::Combined(m.init_stats(partition)),
        }
    }

    fn log_marginal(&self, stats: &AnyStats) -> Result<f64> {
        dispatch!(self, stats, |m, s| m.log_marginal(s))
    }

    fn delta_swap(&self, stats: &AnyStats, labels: &[usize], i: usize, from: usize, to: usize) -> f64 {
        dispatch!(self, stats, |m, s| m.delta_swap(s, labels, i, from, to))
    }

    fn swap_deltas(&self, stats: &AnyStats, labels: &[usize], i: usize, out: &mut [f64]) {
        dispatch!(self, stats, |m, s| m.swap_deltas(s, labels, i, out))
    }

    fn apply_swap(&self, stats: &mut AnyStats, labels: &[usize], i: usize, from: usize, to: usize) {
        dispatch!(self, stats, |m, s| m.apply_swap(s, labels, i, from, to))
    }

    fn remove_cluster(&self, stats: &mut AnyStats, k: usize) {
        dispatch!(self, stats, |m, s| m.remove_cluster(s, k))
    }

    fn delta_merge(&self, stats: &AnyStats, g: usize, h: usize) -> f64 {
        dispatch!(self, stats, |m, s| m.delta_merge(s, g, h))
    }

    fn apply_merge(&self, stats: &mut AnyStats, g: usize, h: usize) {
        dispatch!(self, stats, |m, s| m.apply_merge(s, g, h))
    }

    fn map_estimates(&self, stats: &AnyStats) -> ModelParams {
        dispatch!(self, stats, |m, s| m.map_estimates(s))
    }

    fn prior(&self) -> ModelPrior {
        match self {
            AnyModel::Sbm(m) => m.prior(),
            AnyModel::Gmm(m) => m.prior(),
            AnyModel::DiagGmm(m) => m.prior(),
            AnyModel::Lca(m) => m.prior(),
            AnyModel::Mom(m) => m.prior(),
            AnyModel::Combined(m) => m.prior(),
        }
    }
}

/// Removes `k` from a row-major `k × k` matrix.
pub(crate) fn remove_row_col<T: Copy>(mat: &mut Vec<T>, dim: usize, k: usize) {
    let mut out = Vec::with_capacity((dim - 1) * (dim - 1));
    for r in 0..dim {
        if r == k {
            continue;
        }
        for c in 0..dim {
            if c != k {
                out.push(mat[r * dim + c]);
            }
        }
    }
    *mat = out;
}

/// Removes block `c` from a vector of equally sized per-cluster blocks.
pub(crate) fn remove_block<T>(v: &mut Vec<T>, block: usize, c: usize) {
    v.drain(c * block..(c + 1) * block);
}
