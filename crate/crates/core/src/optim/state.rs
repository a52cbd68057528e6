use crate::error::{Error, Result};
use crate::icl::{assemble_icl, merge_partition_delta, partition_term_unchecked, swap_partition_delta, IclValue};
use crate::models::ObservationModel;
use crate::partition::Partition;

/// A compact partition together with model statistics and its exact ICL.
#[derive(Debug)]
pub struct SearchState<M: ObservationModel> {
    partition: Partition,
    stats: M::Stats,
    icl: IclValue,
    alpha: f64,
}

impl<M: ObservationModel> Clone for SearchState<M> {
    fn clone(&self) -> Self {
        SearchState {
            partition: self.partition.clone(),
            stats: self.stats.clone(),
            icl: self.icl,
            alpha: self.alpha,
        }
    }
}

impl<M: ObservationModel> SearchState<M> {
    pub fn new(model: &M, partition: Partition, alpha: f64) -> Result<Self> {
        if partition.n() != model.n() {
            return Err(Error::LengthMismatch {
                left: partition.n(),
                right: model.n(),
            });
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be positive, got {alpha}")));
        }
        let partition = partition.compact();
        let stats = model.init_stats(&partition);
        let obs = model.log_marginal(&stats)?;
        let icl = assemble_icl(obs, partition.sizes(), alpha)?;
        Ok(SearchState {
            partition,
            stats,
            icl,
            alpha,
        })
    }

    #[inline]
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    #[inline]
    pub fn stats(&self) -> &M::Stats {
        &self.stats
    }

    #[inline]
    pub fn icl(&self) -> IclValue {
        self.icl
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.partition.k()
    }

    pub fn into_partition(self) -> Partition {
        self.partition
    }

    /// Rebuilds statistics and ICL from scratch, discarding accumulated rounding.
    pub fn refresh(&mut self, model: &M) -> Result<()> {
        self.stats = model.init_stats(&self.partition);
        let obs = model.log_marginal(&self.stats)?;
        self.icl = assemble_icl(obs, self.partition.sizes(), self.alpha)?;
        Ok(())
    }

    fn check_object(&self, i: usize) -> Result<()> {
        if i >= self.partition.n() {
            return Err(Error::InvalidObject {
                index: i,
                n: self.partition.n(),
            });
        }
        Ok(())
    }

    fn check_cluster(&self, c: usize) -> Result<()> {
        if c >= self.k() {
            return Err(Error::InvalidCluster { index: c, k: self.k() });
        }
        Ok(())
    }

    /// Total ICL change of moving `i` to cluster `to`.
    pub fn swap_gain(&self, model: &M, i: usize, to: usize) -> Result<f64> {
        self.check_object(i)?;
        self.check_cluster(to)?;
        let from = self.partition.label(i);
        if from == to {
            return Err(Error::domain("swap source and target coincide"));
        }
        Ok(self.swap_gain_unchecked(model, i, from, to))
    }

    pub(crate) fn swap_gain_unchecked(&self, model: &M, i: usize, from: usize, to: usize) -> f64 {
        model.delta_swap(&self.stats, self.partition.labels(), i, from, to) + self.swap_partition_gain(from, to)
    }

    #[inline]
    pub(crate) fn swap_partition_gain(&self, from: usize, to: usize) -> f64 {
        let sizes = self.partition.sizes();
        swap_partition_delta(sizes[from], sizes[to], self.k(), self.partition.n(), self.alpha)
    }

    /// Total ICL change of fusing clusters `g` and `h`.
    pub fn merge_gain(&self, model: &M, g: usize, h: usize) -> Result<f64> {
        self.check_cluster(g)?;
        self.check_cluster(h)?;
        if g == h {
            return Err(Error::domain("cannot merge a cluster with itself"));
        }
        Ok(self.merge_gain_unchecked(model, g, h))
    }

    pub(crate) fn merge_gain_unchecked(&self, model: &M, g: usize, h: usize) -> f64 {
        model.delta_merge(&self.stats, g, h) + self.merge_partition_gain(g, h)
    }

    #[inline]
    pub(crate) fn merge_partition_gain(&self, g: usize, h: usize) -> f64 {
        let sizes = self.partition.sizes();
        merge_partition_delta(sizes[g], sizes[h], self.k(), self.partition.n(), self.alpha)
    }

    /// Moves `i` to `to`, removing the source cluster if it empties.
    /// Returns the removed cluster index, if any.
    pub fn apply_swap(&mut self, model: &M, i: usize, to: usize) -> Result<Option<usize>> {
        self.check_object(i)?;
        self.check_cluster(to)?;
        let from = self.partition.label(i);
        if from == to {
            return Err(Error::domain("swap source and target coincide"));
        }
        let d_obs = model.delta_swap(&self.stats, self.partition.labels(), i, from, to);
        Ok(self.apply_swap_with(model, i, from, to, d_obs))
    }

    pub(crate) fn apply_swap_with(&mut self, model: &M, i: usize, from: usize, to: usize, d_obs: f64) -> Option<usize> {
        model.apply_swap(&mut self.stats, self.partition.labels(), i, from, to);
        self.partition.move_object(i, to);
        let removed = if self.partition.sizes()[from] == 0 {
            self.partition.remove_empty(from);
            model.remove_cluster(&mut self.stats, from);
            Some(from)
        } else {
            None
        };
        self.set_obs(self.icl.obs + d_obs);
        removed
    }

    /// Fuses `h` into `g` (then removes `h`).
    pub fn apply_merge(&mut self, model: &M, g: usize, h: usize) -> Result<()> {
        self.check_cluster(g)?;
        self.check_cluster(h)?;
        if g == h {
            return Err(Error::domain("cannot merge a cluster with itself"));
        }
        let d_obs = model.delta_merge(&self.stats, g, h);
        self.apply_merge_with(model, g, h, d_obs);
        Ok(())
    }

    pub(crate) fn apply_merge_with(&mut self, model: &M, g: usize, h: usize, d_obs: f64) {
        model.apply_merge(&mut self.stats, g, h);
        self.partition.merge(g, h);
        self.set_obs(self.icl.obs + d_obs);
    }

    /// Splits the objects in `moved` out of their (common) cluster into a new one.
    /// The new cluster is appended at index `K`; statistics are rebuilt.
    pub(crate) fn split_off(&mut self, model: &M, moved: &[usize]) -> Result<()> {
        let new = self.partition.push_cluster();
        for &i in moved {
            self.partition.move_object(i, new);
        }
        debug_assert!(self.partition.is_compact());
        self.refresh(model)
    }

    fn set_obs(&mut self, obs: f64) {
        let part = partition_term_unchecked(self.partition.sizes(), self.alpha);
        self.icl = IclValue::new(obs, part);
    }
}
