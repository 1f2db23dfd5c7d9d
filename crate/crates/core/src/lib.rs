#![allow(clippy::needless_range_loop)]

//! # graphtest
//!
//! Classical and temperature-smoothed graph two-sample tests.
//!
//! Given samples from two distributions, the Friedman-Rafsky test counts
//! minimum-spanning-tree edges joining the samples and the k-NN test counts
//! nearest-neighbour edges doing so; few crossings indicate different
//! distributions. Both statistics are outputs of combinatorial optimizers,
//! so they carry no useful gradients. This crate also implements their
//! smoothed versions: a Gibbs measure at temperature `lambda` over the valid
//! edge configurations replaces the optimizer, the statistic becomes the
//! expected crossing count `sum_e Delta(e) mu_e`, and exact inference gives
//! both the marginals `mu` and their derivatives.
//!
//! * spanning trees: matrix-tree / determinantal identities through a
//!   grounded Laplacian ([`smooth_fr`]),
//! * per-node k-subsets: cardinality potentials via a forward-backward
//!   recursion ([`smooth_knn`]),
//! * permutation-null moments in closed form and the resulting t-statistic
//!   ([`null_calculus`]),
//! * the classical tests and permutation p-values ([`classical`]),
//! * MMD and energy baselines ([`baselines`]).
//!
//! As `lambda -> 0` the smoothed statistics recover the classical ones; as
//! `lambda -> inf` the marginals flatten to uniform.

pub mod baselines;
pub mod classical;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod marginals;
pub mod null_calculus;
pub mod oracles;
pub mod smooth_fr;
pub mod smooth_knn;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{
    pairwise_distances, pool_samples, EdgeMode, EdgeSystem, Label, Metric, PointSample,
    PooledData,
};
pub use marginals::MarginalVector;
