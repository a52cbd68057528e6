//! Exact-ICL maximization over partitions.

mod ga;
mod local;
mod multistart;
mod state;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use ga::{crossover, genetic_ga, hybrid_ga, mutate_split, rank_select, split_members, GaOutcome, GaParams};
pub use local::{
    greedy_merge, greedy_swap, is_local_optimum, merge_down_to, swap_epoch, MergeScope, IMPROVEMENT_EPS, MAX_SWAP_EPOCHS,
};
pub use multistart::multistart;
pub use state::SearchState;

use crate::error::Result;
use crate::models::ObservationModel;
use crate::partition::Partition;

/// Independent generator for `(seed, a, b)`; streams never overlap, so
/// results do not depend on which thread consumes which stream.
pub fn stream_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((a << 32) | (b & 0xffff_ffff));
    rng
}

/// Uniform labels in `0..k`, compacted.
pub fn random_partition<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Partition {
    let k = k.max(1);
    Partition::from_labels((0..n).map(|_| rng.random_range(0..k)).collect())
}

const POLISH_STREAM: u64 = 0xffff_fffe;

/// Alternates greedy swaps and merges until neither improves.
pub(crate) fn climb<M: ObservationModel, R: Rng + ?Sized>(model: &M, state: &mut SearchState<M>, rng: &mut R) -> Result<()> {
    loop {
        greedy_swap(model, state, rng, MAX_SWAP_EPOCHS);
        if !greedy_merge(model, state, None) {
            break;
        }
    }
    state.refresh(model)
}

pub(crate) fn polish<M: ObservationModel>(model: &M, state: &mut SearchState<M>, seed: u64) -> Result<()> {
    let mut rng = stream_rng(seed, POLISH_STREAM, 0);
    climb(model, state, &mut rng)
}
