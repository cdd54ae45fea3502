//! The estimator family behind a common trait.
//!
//! Each variant of the pipeline (distributed Hill baseline, pooled
//! bias-corrected estimator, and the reduced-budget alternatives) is a
//! strategy with a name and a transmission budget. The registry maps names
//! to strategies so experiment configs and the CLI can select them at
//! runtime, and downstream code can add its own variants.

use crate::central::{
    aggregate, distributed_hill, gamma_unbiased, gamma_unbiased_v2, gamma_unbiased_v3, pooled_rho,
    EstimatorConfig,
};
use crate::error::CentralError;
use crate::worker::{TransmissionMode, WorkerSummary};
use thiserror::Error;

/// One gamma estimator variant, computable from worker summaries of its
/// required transmission mode.
pub trait GammaEstimator: Send + Sync {
    /// Registry key, also used as the `estimator` column in reports.
    fn name(&self) -> &'static str;

    /// The transmission budget this estimator needs.
    fn required_mode(&self) -> TransmissionMode;

    /// Computes the estimate from summaries sharing `required_mode()`.
    fn estimate(
        &self,
        summaries: &[WorkerSummary],
        config: &EstimatorConfig,
    ) -> Result<f64, CentralError>;
}

/// Distributed Hill baseline: mean of per-machine Hill estimates.
pub struct DistributedHillEstimator;

impl GammaEstimator for DistributedHillEstimator {
    fn name(&self) -> &'static str {
        "dh"
    }

    fn required_mode(&self) -> TransmissionMode {
        TransmissionMode::FiveStat
    }

    fn estimate(
        &self,
        summaries: &[WorkerSummary],
        config: &EstimatorConfig,
    ) -> Result<f64, CentralError> {
        distributed_hill(&aggregate(summaries, config.weighting)?)
    }
}

/// Pooled bias-corrected estimator: rho from pooled moments at `k_rho`,
/// correction applied to pooled moments at `k_n`.
pub struct PooledCorrectedEstimator;

impl GammaEstimator for PooledCorrectedEstimator {
    fn name(&self) -> &'static str {
        "unbiased"
    }

    fn required_mode(&self) -> TransmissionMode {
        TransmissionMode::FiveStat
    }

    fn estimate(
        &self,
        summaries: &[WorkerSummary],
        config: &EstimatorConfig,
    ) -> Result<f64, CentralError> {
        let pooled = aggregate(summaries, config.weighting)?;
        let rho = pooled_rho(&pooled, config.tau, config.rho_policy)?;
        gamma_unbiased(&pooled, rho)
    }
}

/// Three-stat variant: per-machine rho estimates are averaged centrally.
pub struct MeanLocalRhoEstimator;

impl GammaEstimator for MeanLocalRhoEstimator {
    fn name(&self) -> &'static str {
        "three-stat"
    }

    fn required_mode(&self) -> TransmissionMode {
        TransmissionMode::ThreeStat
    }

    fn estimate(
        &self,
        summaries: &[WorkerSummary],
        config: &EstimatorConfig,
    ) -> Result<f64, CentralError> {
        gamma_unbiased_v2(&aggregate(summaries, config.weighting)?, config.rho_policy)
    }
}

/// One-stat variant: per-machine bias-corrected estimates are averaged.
pub struct MeanLocalGammaEstimator;

impl GammaEstimator for MeanLocalGammaEstimator {
    fn name(&self) -> &'static str {
        "one-stat"
    }

    fn required_mode(&self) -> TransmissionMode {
        TransmissionMode::OneStat
    }

    fn estimate(
        &self,
        summaries: &[WorkerSummary],
        config: &EstimatorConfig,
    ) -> Result<f64, CentralError> {
        gamma_unbiased_v3(&aggregate(summaries, config.weighting)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("estimator `{0}` already registered")]
pub struct DuplicateEstimator(pub String);

/// Name-keyed registry of estimator strategies. Iteration order is
/// registration order, so reports stay deterministic.
pub struct EstimatorRegistry {
    entries: Vec<Box<dyn GammaEstimator>>,
}

impl EstimatorRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// Registry with the four built-in estimators.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(DistributedHillEstimator)).unwrap();
        reg.register(Box::new(PooledCorrectedEstimator)).unwrap();
        reg.register(Box::new(MeanLocalRhoEstimator)).unwrap();
        reg.register(Box::new(MeanLocalGammaEstimator)).unwrap();
        reg
    }

    pub fn register(&mut self, estimator: Box<dyn GammaEstimator>) -> Result<(), DuplicateEstimator> {
        if self.get(estimator.name()).is_some() {
            return Err(DuplicateEstimator(estimator.name().to_string()));
        }
        self.entries.push(estimator);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&dyn GammaEstimator> {
        self.entries.iter().find(|e| e.name() == name).map(|e| e.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn GammaEstimator> {
        self.entries.iter().map(|e| e.as_ref())
    }
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
