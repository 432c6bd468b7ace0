//! Density estimation on `[0, 1]` under squared L2 loss by model selection.
//!
//! Every density is a step function, so distances, tail functionals and
//! histogram risks are computed exactly rather than by quadrature.
//!
//! The crate is organised bottom-up:
//!
//! - [`density`]: step functions, densities, metrics, the bounded projection
//!   `π_Γ`, the mixing map `τ` and inverse-CDF sampling.
//! - [`models`]: partitions, histogram and projection estimators with their
//!   exact risks, and model weights.
//! - [`net`]: discrete nets of Γ-bounded densities over linear models.
//! - [`select`]: randomized likelihood-ratio tests, the `D_X` defeat radius,
//!   T-estimator selection and the Γ ladder.
//! - [`estimators`]: the composite estimators (`estimate_for_gamma`,
//!   `full_estimator`, aggregation).
//! - [`harness`]: Monte Carlo risk engine, experiment catalog and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod estimators;
pub mod harness;
pub mod models;
pub mod net;
pub mod rng;
pub mod select;

pub use density::{PiecewiseDensity, Sample, StepFunction};
pub use models::{Partition, PartitionModel, WeightScheme, WeightedModelFamily};
pub use net::Net;
pub use rng::RngStream;
pub use select::{CandidateSet, SelectionTrace, TestConfig};

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative density value {value} on cell {index}")]
    NegativeValue { index: usize, value: f64 },

    #[error("density does not integrate to 1 (integral = {integral})")]
    NotNormalized { integral: f64 },

    #[error("bad breakpoints: {0}")]
    BadBreakpoints(String),

    #[error("no density on [0,1] has sup norm bounded by {gamma}")]
    InfeasibleBound { gamma: f64 },

    #[error("theta = {0} outside (0, 1/3]")]
    BadTheta(f64),

    #[error("basis is not orthonormal (max Gram deviation {max_dev:e})")]
    NotOrthonormal { max_dev: f64 },

    #[error("model weight {weight} at index {index} is below 1/10")]
    WeightTooSmall { index: usize, weight: f64 },

    #[error("net would hold more than {cap} lattice points")]
    NetTooLarge { cap: usize },

    #[error("likelihood ratio undefined: a mixed density vanishes at an observation")]
    DegenerateRatio,

    #[error("no nets to select from")]
    EmptyNets,

    #[error("no candidates to select from")]
    EmptyCandidates,

    #[error("sample of size {n} is too small (need at least {min})")]
    SampleTooSmall { n: usize, min: usize },

    #[error("{n} preliminary estimators exceed the cap of {cap}")]
    TooManyPreliminaries { n: usize, cap: usize },

    #[error("candidate {index} has sup norm {sup} above its certified bound {bound}")]
    UncertifiedCandidate { index: usize, sup: f64, bound: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
