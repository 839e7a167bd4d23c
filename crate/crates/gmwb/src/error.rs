//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Contract or market configuration violates one or more invariants.
    /// Every violation is listed, not just the first.
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    /// A precondition on an operation argument failed.
    #[error("{0}")]
    InvalidInput(String),

    #[error("path index {index} out of range (have {num_paths} paths)")]
    PathIndexOutOfRange { index: usize, num_paths: usize },

    /// The fee rate baked into a path set differs from the contract's.
    #[error("fee rate mismatch: contract has {spec}, path set was generated with {paths}")]
    AlphaMismatch { spec: f64, paths: f64 },

    /// Fair fee: no solution exists for a non-positive riskless rate.
    #[error("no fair fee exists for riskless rate r = {0}; r > 0 is required")]
    NoSolutionNonpositiveRate(f64),

    /// Fair fee: the sampled value at alpha = 0 sits below the premium by
    /// more than Monte Carlo noise allows, which signals a broken estimator
    /// rather than a market condition.
    #[error("bracket failure: V0(0) = {v0} is below P = {premium} beyond noise ({stderr} stderr)")]
    BracketFailure { v0: f64, premium: f64, stderr: f64 },

    /// Out-of-sample pricing must not reuse the seed the policy was fit on.
    #[error("seed collision: policy was fit with seed {0}; use a different pricing seed")]
    SeedCollision(u64),

    /// Lattice oracle: the branch probability left (0, 1); the time step is
    /// too coarse for the given rate and volatility.
    #[error("lattice probability q = {q} outside (0, 1); refine the grid or raise sigma")]
    TreeProbability { q: f64 },
}
