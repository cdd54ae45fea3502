//! Distributed estimation of the extreme value index for heavy-tailed data.
//!
//! Data sit on `m` machines that may only transmit a fixed handful of scalars
//! each (1, 3, 5 or 6 — the transmission budget). Every machine reduces its
//! shard to a few moment statistics of the top log-excesses; a central machine
//! averages them and applies a second-order bias correction, so the combined
//! estimate stays usable at exceedance counts where the plain averaged Hill
//! estimator is already badly biased.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`distributions`]: seeded generation of heavy-tailed shards via tail
//!   quantile functions applied to Pareto(1) variables.
//! - [`worker`]: everything computed on one machine — order statistics,
//!   `R`-statistics, the local Hill estimator, local second-order parameter
//!   estimate, and the transmitted [`WorkerSummary`].
//! - [`central`]: aggregation and the estimator family (distributed Hill,
//!   bias-corrected pooled estimator and its reduced-budget variants, high
//!   quantile extrapolation).
//! - [`estimator`]: the estimator variants behind a common trait, registered
//!   by name and selected at runtime.
//! - [`theory`]: closed-form oracle layer (the finite-sample factor `g`,
//!   asymptotic bias/variance, limit covariance, GPD moments, optimal
//!   exceedance counts) used for diagnostics and as test oracles.
//! - [`sim`]: Monte Carlo experiment driver producing bias/RMSE/variance
//!   tables and single-sample trajectories.
//! - [`transport`]: line protocol plus coordinator/worker session logic that
//!   enforces the transmission budget across a real process boundary.

pub mod central;
pub mod distributions;
pub mod error;
pub mod estimator;
pub mod numeric;
pub mod report;
pub mod rng;
pub mod sim;
pub mod theory;
pub mod transport;
pub mod worker;

pub use central::{
    aggregate, distributed_hill, estimate, gamma_unbiased, gamma_unbiased_v2, gamma_unbiased_v3,
    pooled_rho, quantile_estimate, EstimateReport, EstimatorConfig, EstimatorVariant, PooledStats,
    QuantileEstimate, Weighting,
};
pub use distributions::{
    generate_shards, generate_shards_rep, pareto1_from_uniform, table1_params, DistributionKind,
    Shard, ShardPlan, TailDistribution,
};
pub use error::{CentralError, ConfigError, DistError, TheoryError, TransportError, WorkerError};
pub use estimator::{EstimatorRegistry, GammaEstimator};
pub use theory::TheoryModel;
pub use worker::{make_summary, RhoPolicy, RStats, SummaryPayload, TransmissionMode, WorkerSummary};
