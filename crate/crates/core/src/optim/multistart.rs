use rayon::prelude::*;

use super::{climb, random_partition, stream_rng, SearchState};
use crate::error::{Error, Result};
use crate::models::ObservationModel;

const MULTISTART_STREAM: u64 = 0xffff_fffd;

/// Best of `nb_start` independent greedy chains, each started from a random
/// partition into `k_init` clusters. Chain `c` always uses the same random
/// stream, so more starts can only improve the result.
pub fn multistart<M: ObservationModel>(model: &M, k_init: usize, nb_start: usize, alpha: f64, seed: u64) -> Result<SearchState<M>> {
    if nb_start == 0 {
        return Err(Error::config("nb_start must be at least 1"));
    }
    let n = model.n();
    if n == 0 {
        return Err(Error::data("nothing to cluster"));
    }
    let chains: Vec<SearchState<M>> = (0..nb_start)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, MULTISTART_STREAM, c as u64);
            let mut s = SearchState::new(model, random_partition(n, k_init.min(n), &mut rng), alpha)?;
            climb(model, &mut s, &mut rng)?;
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, s) in chains.iter().enumerate() {
        if s.icl().total > chains[best].icl().total {
            best = i;
        }
    }
    Ok(chains.into_iter().nth(best).expect("at least one chain"))
}
