//! Several aligned views of the same objects clustered by one partition.
//!
//! The observational term is the sum of the per-view terms, so every delta is
//! the sum of per-view deltas.

use std::collections::HashSet;

use super::{AnyModel, AnyStats, ModelParams, ModelPrior, NamedParams, NamedPrior, ObservationModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::partition::Partition;

#[derive(Debug, Clone)]
pub struct CombinedModel {
    n: usize,
    views: Vec<(String, AnyModel)>,
}

#[derive(Debug, Clone)]
pub struct CombinedStats {
    views: Vec<AnyStats>,
}

impl CombinedModel {
    /// Pairs each prior with the dataset of the same name.
    pub fn build(priors: Vec<NamedPrior>, mut data: Vec<(String, Dataset)>) -> Result<Self> {
        if priors.is_empty() {
            return Err(Error::config("a combined model needs at least one view"));
        }
        let mut seen = HashSet::new();
        let mut views = Vec::with_capacity(priors.len());
        for NamedPrior { name, prior } in priors {
            if !seen.insert(name.clone()) {
                return Err(Error::config(format!("duplicate view name {name:?}")));
            }
            if matches!(prior, ModelPrior::Combined { .. }) {
                return Err(Error::config("combined views cannot be nested"));
            }
            let pos = data
                .iter()
                .position(|(n, _)| *n == name)
                .ok_or_else(|| Error::config(format!("no data for view {name:?}")))?;
            let (_, d) = data.swap_remove(pos);
            views.push((name, AnyModel::build(prior, d)?));
        }
        if let Some((name, _)) = data.first() {
            return Err(Error::config(format!("no prior for view {name:?}")));
        }
        Self::new(views)
    }

    pub fn new(views: Vec<(String, AnyModel)>) -> Result<Self> {
        let n = views.first().map_or(0, |(_, m)| m.n());
        for (name, m) in &views {
            if m.n() != n {
                return Err(Error::data(format!("view {name:?} has {} objects, expected {n}", m.n())));
            }
        }
        Ok(CombinedModel { n, views })
    }

    pub fn views(&self) -> &[(String, AnyModel)] {
        &self.views
    }

    /// Observational term of each view.
    pub fn view_marginals(&self, st: &CombinedStats) -> Result<Vec<f64>> {
        self.views
            .iter()
            .zip(&st.views)
            .map(|((_, m), s)| m.log_marginal(s))
            .collect()
    }
}

impl ObservationModel for CombinedModel {
    type Stats = CombinedStats;

    fn n(&self) -> usize {
        self.n
    }

    fn init_stats(&self, partition: &Partition) -> CombinedStats {
        CombinedStats {
            views: self.views.iter().map(|(_, m)| m.init_stats(partition)).collect(),
        }
    }

    fn log_marginal(&self, st: &CombinedStats) -> Result<f64> {
        Ok(self.view_marginals(st)?.iter().sum())
    }

    fn delta_swap(&self, st: &CombinedStats, labels: &[usize], i: usize, g: usize, h: usize) -> f64 {
        self.views
            .iter()
            .zip(&st.views)
            .map(|((_, m), s)| m.delta_swap(s, labels, i, g, h))
            .sum()
    }

    fn swap_deltas(&self, st: &CombinedStats, labels: &[usize], i: usize, out: &mut [f64]) {
        out.fill(0.0);
        let mut buf = vec![0.0; out.len()];
        for ((_, m), s) in self.views.iter().zip(&st.views) {
            m.swap_deltas(s, labels, i, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b;
            }
        }
    }

    fn apply_swap(&self, st: &mut CombinedStats, labels: &[usize], i: usize, g: usize, h: usize) {
        for ((_, m), s) in self.views.iter().zip(&mut st.views) {
            m.apply_swap(s, labels, i, g, h);
        }
    }

    fn remove_cluster(&self, st: &mut CombinedStats, c: usize) {
        for ((_, m), s) in self.views.iter().zip(&mut st.views) {
            m.remove_cluster(s, c);
        }
    }

    fn delta_merge(&self, st: &CombinedStats, g: usize, h: usize) -> f64 {
        self.views
            .iter()
            .zip(&st.views)
            .map(|((_, m), s)| m.delta_merge(s, g, h))
            .sum()
    }

    fn apply_merge(&self, st: &mut CombinedStats, g: usize, h: usize) {
        for ((_, m), s) in self.views.iter().zip(&mut st.views) {
            m.apply_merge(s, g, h);
        }
    }

    fn map_estimates(&self, st: &CombinedStats) -> ModelParams {
        ModelParams::Combined {
            views: self
                .views
                .iter()
                .zip(&st.views)
                .map(|((name, m), s)| NamedParams {
                    name: name.clone(),
                    params: m.map_estimates(s),
                })
                .collect(),
        }
    }

    fn prior(&self) -> ModelPrior {
        ModelPrior::Combined {
            views: self
                .views
                .iter()
                .map(|(name, m)| NamedPrior {
                    name: name.clone(),
                    prior: m.prior(),
                })
                .collect(),
        }
    }
}
