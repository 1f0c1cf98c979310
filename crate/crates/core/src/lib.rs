//! Distributed sparse logistic regression with elastic-net regularization.
//!
//! Trains one model per data partition and merges the partition models into
//! a single global model. Three merge strategies are provided: plain
//! coefficient averaging, optimal weighted averaging (a small ridge-logistic
//! fit over the partition models' predictions), and a two-round scheme that
//! shares per-partition class centroids before the first round and reweights
//! the penalty per feature between rounds.

pub mod aggregate;
pub mod centroid;
pub mod data;
pub mod error;
pub mod eval;
pub mod objective;
pub mod solver;
pub mod util;

pub use error::{Error, Result};
