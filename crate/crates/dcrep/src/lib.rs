//! Divide-and-color representability of threshold Gaussian and symmetric
//! stable vectors.

pub mod error;
pub mod rng;
pub mod special;
pub mod quad;
pub mod partitions;
pub mod gaussian_law;
pub mod stats;
pub mod stable_law;
pub mod simplex;
pub mod report;
pub mod dc_solver;
pub mod conditions;
pub mod asymptotics;
pub mod embeddings;

pub use error::{Error, Result};
