//! Twin and N-world networks for structural causal models.
//!
//! The crate covers model construction, world replication, elimination
//! orders, jointrees with lifted separators, separator thinning and exact
//! counterfactual inference, plus random model generators and a benchmark
//! driver.

pub mod audit;
pub mod bench;
pub mod catalog;
pub mod elimination;
pub mod error;
pub mod factor;
pub mod inference;
pub mod jointree;
pub mod model;
pub mod randgen;
pub mod moral;
pub mod parallel;
pub mod thinning;
pub mod treewidth;
pub mod worlds;

pub use error::{Error, Result};
