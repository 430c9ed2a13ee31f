//! Weighted meta-gradient poisoning attacks on graph link prediction.
//!
//! The pipeline trains a VGAE surrogate on the clean graph, accumulates a
//! per-epoch weighted attack loss, differentiates it with respect to the
//! adjacency matrix, greedily flips the highest-impact entries under a budget,
//! and measures the damage on victim link predictors trained on the poisoned
//! graph.

pub mod attack;
pub mod baselines;
pub mod checkpoint;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod modifier;
pub mod optim;
pub mod surrogate;
pub mod tensor;
pub mod victims;

pub use error::{Error, Result};
pub use tensor::{Matrix, Tape, Var};
