//! Central aggregation and the combined estimators.
//!
//! The central machine averages whatever statistics the workers were allowed
//! to send (equal weights or shard-size weights), estimates the second order
//! parameter from the pooled moments at `k_rho`, and applies the bias
//! correction to the pooled moments at `k_n`:
//!
//! ```text
//! gamma~       = pooled correction with rho estimated from pooled moments
//! gamma~ (v2)  = pooled correction with the average of per-machine rho estimates
//! gamma~ (v3)  = average of per-machine bias-corrected estimates
//! ```
//!
//! Summaries are summed in machine-id order with compensated summation, so
//! the result does not depend on arrival order.

use crate::error::{CentralError, WorkerError};
use crate::numeric::KahanSum;
use crate::worker::{
    self, bias_corrected, resolve_rho, RhoPolicy, RStats, TransmissionMode, WorkerSummary,
};

/// How worker summaries are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Plain average over machines.
    #[default]
    EqualMean,
    /// Weights `n_j / N`, for shards of unequal size.
    SizeWeighted,
}

impl Weighting {
    pub fn name(self) -> &'static str {
        match self {
            Weighting::EqualMean => "equal",
            Weighting::SizeWeighted => "size",
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "equal" | "equal-mean" => Some(Weighting::EqualMean),
            "size" | "size-weighted" => Some(Weighting::SizeWeighted),
            _ => None,
        }
    }
}

/// Central-machine configuration for one estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub k_n: usize,
    pub k_rho: usize,
    pub tau: f64,
    pub mode: TransmissionMode,
    pub rho_policy: RhoPolicy,
    pub weighting: Weighting,
}

impl EstimatorConfig {
    pub fn new(
        k_n: usize,
        k_rho: usize,
        tau: f64,
        mode: TransmissionMode,
        rho_policy: RhoPolicy,
        weighting: Weighting,
    ) -> Result<Self, CentralError> {
        if k_n == 0 || k_n >= k_rho {
            return Err(CentralError::Worker(WorkerError::KOrder { k_n, k_rho, n: 0 }));
        }
        if tau < 0.0 {
            return Err(CentralError::Worker(WorkerError::NegativeTau(tau)));
        }
        Ok(Self { k_n, k_rho, tau, mode, rho_policy, weighting })
    }

    /// Non-fatal configuration notes; tau above 1 is allowed but unusual.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.tau > 1.0 {
            w.push(format!("tau = {} is outside the recommended range [0, 1]", self.tau));
        }
        w
    }
}

/// Aggregated statistics on the central machine. Mirrors the transmission
/// modes: each variant holds the (weighted) means of the fields its mode
/// carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PooledPayload {
    FiveStat {
        r1_kn: f64,
        r2_kn: f64,
        r1_krho: f64,
        r2_krho: f64,
        r3_krho: f64,
    },
    SixStat {
        r1_kn: f64,
        r2_kn: f64,
        r1_krho: f64,
        r2_krho: f64,
        r3_krho: f64,
        mean_threshold: f64,
    },
    ThreeStat {
        mean_local_rho: f64,
        r1_kn: f64,
        r2_kn: f64,
    },
    OneStat {
        mean_local_gamma: f64,
    },
}

/// Pooled worker summaries plus the shared configuration they were computed
/// under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledStats {
    pub m: usize,
    pub total_n: usize,
    pub k_n: usize,
    pub k_rho: usize,
    pub weights_used: Weighting,
    pub payload: PooledPayload,
}

impl PooledStats {
    pub fn mode(&self) -> TransmissionMode {
        match self.payload {
            PooledPayload::FiveStat { .. } => TransmissionMode::FiveStat,
            PooledPayload::SixStat { .. } => TransmissionMode::SixStat,
            PooledPayload::ThreeStat { .. } => TransmissionMode::ThreeStat,
            PooledPayload::OneStat { .. } => TransmissionMode::OneStat,
        }
    }

    /// Pooled moments at `k_n` (unavailable for the one-stat budget).
    pub fn kn_moments(&self) -> Option<(f64, f64)> {
        match self.payload {
            PooledPayload::FiveStat { r1_kn, r2_kn, .. }
            | PooledPayload::SixStat { r1_kn, r2_kn, .. }
            | PooledPayload::ThreeStat { r1_kn, r2_kn, .. } => Some((r1_kn, r2_kn)),
            PooledPayload::OneStat { .. } => None,
        }
    }

    fn krho_stats(&self) -> Option<RStats> {
        match self.payload {
            PooledPayload::FiveStat { r1_krho, r2_krho, r3_krho, .. }
            | PooledPayload::SixStat { r1_krho, r2_krho, r3_krho, .. } => {
                Some(RStats { k: self.k_rho, r1: r1_krho, r2: r2_krho, r3: r3_krho })
            }
            _ => None,
        }
    }
}

/// Averages worker summaries field-wise.
///
/// Summaries are re-sorted by machine id and summed with compensated
/// summation, making the pooled values independent of arrival order. With
/// equal weights and a single machine the pooled stats echo the summary
/// verbatim.
pub fn aggregate(
    summaries: &[WorkerSummary],
    weighting: Weighting,
) -> Result<PooledStats, CentralError> {
    if summaries.is_empty() {
        return Err(CentralError::EmptySummaries);
    }
    let mut ordered: Vec<&WorkerSummary> = summaries.iter().collect();
    ordered.sort_by_key(|s| s.machine_id);
    for pair in ordered.windows(2) {
        if pair[0].machine_id == pair[1].machine_id {
            return Err(CentralError::DuplicateMachine(pair[0].machine_id));
        }
    }
    let mode = ordered[0].mode();
    let k_n = ordered[0].payload.k_n();
    let k_rho = ordered[0].payload.k_rho();
    for s in &ordered {
        if s.mode() != mode {
            return Err(CentralError::MixedModes);
        }
        if s.payload.k_n() != k_n || s.payload.k_rho() != k_rho {
            return Err(CentralError::MismatchedK);
        }
    }
    let m = ordered.len();
    let total_n: usize = ordered.iter().map(|s| s.n_j).sum();

    // weighted field-wise mean over machines, one accumulator per scalar slot
    let width = mode.scalar_budget();
    let mut sums = vec![KahanSum::new(); width];
    for s in &ordered {
        let w = match weighting {
            Weighting::EqualMean => 1.0,
            Weighting::SizeWeighted => s.n_j as f64,
        };
        for (acc, v) in sums.iter_mut().zip(s.payload.scalars()) {
            acc.add(w * v);
        }
    }
    let denom = match weighting {
        Weighting::EqualMean => m as f64,
        Weighting::SizeWeighted => total_n as f64,
    };
    let mean = |i: usize| sums[i].value() / denom;

    let payload = match mode {
        TransmissionMode::FiveStat => PooledPayload::FiveStat {
            r1_kn: mean(0),
            r2_kn: mean(1),
            r1_krho: mean(2),
            r2_krho: mean(3),
            r3_krho: mean(4),
        },
        TransmissionMode::SixStat => PooledPayload::SixStat {
            r1_kn: mean(0),
            r2_kn: mean(1),
            r1_krho: mean(2),
            r2_krho: mean(3),
            r3_krho: mean(4),
            mean_threshold: mean(5),
        },
        TransmissionMode::ThreeStat => PooledPayload::ThreeStat {
            mean_local_rho: mean(0),
            r1_kn: mean(1),
            r2_kn: mean(2),
        },
        TransmissionMode::OneStat => PooledPayload::OneStat { mean_local_gamma: mean(0) },
    };
    Ok(PooledStats { m, total_n, k_n, k_rho, weights_used: weighting, payload })
}

/// Second order parameter estimate from the pooled moments at `k_rho`.
pub fn pooled_rho(
    pooled: &PooledStats,
    tau: f64,
    policy: RhoPolicy,
) -> Result<f64, CentralError> {
    let stats = pooled.krho_stats().ok_or(CentralError::ModeUnsupported {
        needed: "five- or six-stat",
        got: pooled.mode().name(),
    })?;
    Ok(resolve_rho(worker::rho_estimate(&stats, tau), policy)
        .map_err(CentralError::Worker)?
        .0)
}

/// The distributed Hill estimator: the pooled first moment at `k_n`.
pub fn distributed_hill(pooled: &PooledStats) -> Result<f64, CentralError> {
    pooled
        .kn_moments()
        .map(|(r1, _)| r1)
        .ok_or(CentralError::ModeUnsupported { needed: "pooled moments at k_n", got: "one" })
}

/// The asymptotically unbiased estimator: bias correction applied to the
/// pooled moments with a pooled rho estimate.
pub fn gamma_unbiased(pooled: &PooledStats, rho_hat: f64) -> Result<f64, CentralError> {
    let (r1, r2) = pooled.kn_moments().ok_or(CentralError::ModeUnsupported {
        needed: "pooled moments at k_n",
        got: "one",
    })?;
    Ok(bias_corrected(r1, r2, rho_hat)?)
}

/// Reduced-budget variant: same correction, rho taken as the average of the
/// per-machine estimates (three-stat summaries).
pub fn gamma_unbiased_v2(pooled: &PooledStats, policy: RhoPolicy) -> Result<f64, CentralError> {
    match pooled.payload {
        PooledPayload::ThreeStat { mean_local_rho, r1_kn, r2_kn } => {
            let (rho, _) = resolve_rho(Ok(mean_local_rho), policy).map_err(CentralError::Worker)?;
            Ok(bias_corrected(r1_kn, r2_kn, rho)?)
        }
        _ => Err(CentralError::ModeUnsupported {
            needed: "three-stat",
            got: pooled.mode().name(),
        }),
    }
}

/// Minimal-budget variant: the average of per-machine bias-corrected
/// estimates (one-stat summaries).
pub fn gamma_unbiased_v3(pooled: &PooledStats) -> Result<f64, CentralError> {
    match pooled.payload {
        PooledPayload::OneStat { mean_local_gamma } => Ok(mean_local_gamma),
        _ => Err(CentralError::ModeUnsupported { needed: "one-stat", got: pooled.mode().name() }),
    }
}

/// A high-quantile estimate together with its correction factor and the
/// plain extrapolation it multiplies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileEstimate {
    /// `extrapolation * correction`.
    pub value: f64,
    /// `1 - (R2 - R1^2)(1 - rho)^2 / (2 R1 rho^2)`; can turn non-positive in
    /// bad finite samples, which is surfaced as a diagnostic, never clamped.
    pub correction: f64,
    /// `mean_threshold * (k_n / (n p_N))^gamma`.
    pub extrapolation: f64,
}

/// Extrapolates the high quantile `x(p_N)` from six-stat pooled statistics.
///
/// The mean threshold is carried to the quantile `p_N` with the
/// bias-corrected index as exponent; `n` is the mean shard size `N/m`.
pub fn quantile_estimate(
    pooled: &PooledStats,
    rho_hat: f64,
    gamma: f64,
    p_n: f64,
) -> Result<QuantileEstimate, CentralError> {
    let (r1, r2, mean_threshold) = match pooled.payload {
        PooledPayload::SixStat { r1_kn, r2_kn, mean_threshold, .. } => {
            (r1_kn, r2_kn, mean_threshold)
        }
        _ => {
            return Err(CentralError::ModeUnsupported {
                needed: "six-stat",
                got: pooled.mode().name(),
            })
        }
    };
    if !(rho_hat < 0.0) {
        return Err(CentralError::Worker(WorkerError::RhoDegenerate { rho: rho_hat }));
    }
    let n_mean = pooled.total_n as f64 / pooled.m as f64;
    let bound = pooled.k_n as f64 / n_mean;
    if !(p_n > 0.0) || p_n >= bound {
        return Err(CentralError::InvalidPn { p_n, bound });
    }
    let ratio = pooled.k_n as f64 / (n_mean * p_n);
    let extrapolation = mean_threshold * ratio.powf(gamma);
    let correction =
        1.0 - (r2 - r1 * r1) * (1.0 - rho_hat) * (1.0 - rho_hat) / (2.0 * r1 * rho_hat * rho_hat);
    Ok(QuantileEstimate { value: extrapolation * correction, correction, extrapolation })
}

/// Which estimator produced the headline value of an [`EstimateReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorVariant {
    /// Pooled bias-corrected estimator (five/six-stat budget).
    Unbiased,
    /// Mean-of-local-rho variant (three-stat budget).
    ThreeStat,
    /// Mean-of-local-estimates variant (one-stat budget).
    OneStat,
}

impl EstimatorVariant {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorVariant::Unbiased => "unbiased",
            EstimatorVariant::ThreeStat => "three-stat",
            EstimatorVariant::OneStat => "one-stat",
        }
    }
}

/// The central machine's output for one estimation session.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// Distributed Hill baseline; absent under the one-stat budget.
    pub gamma_dh: Option<f64>,
    /// Second order parameter estimate; absent under the one-stat budget.
    pub rho_hat: Option<f64>,
    pub gamma_unbiased: f64,
    pub variant: EstimatorVariant,
    pub quantile: Option<f64>,
    /// Fallbacks and sanity warnings hit along the way.
    pub diagnostics: Vec<String>,
}

/// Full central pipeline: aggregate, estimate rho, pick the estimator the
/// budget allows, optionally extrapolate a quantile. Every fallback applied
/// is recorded in the report diagnostics.
pub fn estimate(
    summaries: &[WorkerSummary],
    config: &EstimatorConfig,
    p_n: Option<f64>,
) -> Result<EstimateReport, CentralError> {
    let pooled = aggregate(summaries, config.weighting)?;
    if pooled.mode() != config.mode {
        return Err(CentralError::ModeUnsupported {
            needed: config.mode.name(),
            got: pooled.mode().name(),
        });
    }
    if p_n.is_some() && config.mode != TransmissionMode::SixStat {
        return Err(CentralError::ModeUnsupported {
            needed: "six-stat",
            got: config.mode.name(),
        });
    }
    let mut diagnostics = Vec::new();

    let (variant, rho_hat, gamma) = match pooled.payload {
        PooledPayload::FiveStat { .. } | PooledPayload::SixStat { .. } => {
            let stats = pooled.krho_stats().expect("five/six-stat carries k_rho moments");
            let (rho, fell_back) =
                resolve_rho(worker::rho_estimate(&stats, config.tau), config.rho_policy)
                    .map_err(CentralError::Worker)?;
            if fell_back {
                diagnostics.push("pooled rho degenerate, fell back to -1".to_string());
            }
            (EstimatorVariant::Unbiased, Some(rho), gamma_unbiased(&pooled, rho)?)
        }
        PooledPayload::ThreeStat { mean_local_rho, .. } => {
            let (rho, fell_back) =
                resolve_rho(Ok(mean_local_rho), config.rho_policy).map_err(CentralError::Worker)?;
            if fell_back {
                diagnostics.push("mean local rho degenerate, fell back to -1".to_string());
            }
            (EstimatorVariant::ThreeStat, Some(rho), gamma_unbiased(&pooled, rho)?)
        }
        PooledPayload::OneStat { mean_local_gamma } => {
            (EstimatorVariant::OneStat, None, mean_local_gamma)
        }
    };

    let quantile = match p_n {
        Some(p) => {
            let rho = rho_hat.expect("six-stat flow always has rho");
            let q = quantile_estimate(&pooled, rho, gamma, p)?;
            if q.correction <= 0.0 {
                diagnostics.push(format!(
                    "quantile_correction_nonpositive: factor = {}",
                    q.correction
                ));
            }
            Some(q.value)
        }
        None => None,
    };

    Ok(EstimateReport {
        gamma_dh: pooled.kn_moments().map(|(r1, _)| r1),
        rho_hat,
        gamma_unbiased: gamma,
        variant,
        quantile,
        diagnostics,
    })
}
