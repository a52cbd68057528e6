//! Model-based clustering by maximization of the exact integrated
//! classification likelihood (ICL).

// Block-matrix code indexes several arrays with the same cluster indices.
#![allow(clippy::needless_range_loop)]
// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod fit;
pub mod hierarchy;
pub mod icl;
pub mod io;
pub mod models;
pub mod optim;
pub mod partition;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
pub use partition::{adjusted_rand_index, Partition};
