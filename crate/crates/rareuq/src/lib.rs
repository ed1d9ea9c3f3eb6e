//! Rare-event probability estimation under input uncertainty.
//!
//! The crate estimates small probabilities gamma = P(performance event)
//! with importance sampling, then separates two sources of error around the
//! estimate: simulation noise from the finite Monte Carlo batch, and input
//! uncertainty from having fitted the input distribution to finite data.
//! The input part is quantified by bootstrapping the fitted parameters and
//! reweighting the one existing batch to every replicate through its
//! likelihood ratios, so the bootstrap costs no new performance-function
//! evaluations.
//!
//! The pieces, bottom up:
//!
//! - [`stream`]: keyed random streams; sibling streams are independent and
//!   every run is reproducible from one seed for any thread count.
//! - [`input_models`]: exponential, Gaussian, and product models with MLE
//!   fitting, Fisher information, and exponential tilting.
//! - [`monte_carlo`]: batch generation, importance-sampling and crude
//!   estimators, CLT intervals, batch persistence.
//! - [`bootstrap`]: plain, parametric, and asymptotic-normal parameter
//!   resampling, likelihood-ratio reuse, and quantile intervals.
//! - [`cross_entropy`]: tilt search for an accelerating distribution.
//! - [`lane_change`]: a closed-form vehicle cut-in crash surrogate and its
//!   synthetic dataset plumbing.
//! - [`experiments`] and [`config`]: the seeded study drivers behind the
//!   `rareuq` binary.

pub mod bootstrap;
pub mod config;
pub mod cross_entropy;
pub mod error;
pub mod experiments;
pub mod input_models;
pub mod lane_change;
pub mod matrix;
pub mod monte_carlo;
pub mod normal;
pub mod stream;

pub use bootstrap::{lr_uq_interval, BootstrapKind, BootstrapReplicates, BootstrapScheme};
pub use cross_entropy::{cross_entropy_tilt, CEConfig, CeResult};
pub use error::{Error, Result};
pub use input_models::{fit_mle, Family, FittedModel, ParametricModel, Samples};
pub use monte_carlo::{
    crude_estimate, is_estimate, run_batch, EstimateKind, EstimateWithCI, ExperimentBatch,
    FnPerf, PerformanceFunction,
};
pub use stream::RngStream;
