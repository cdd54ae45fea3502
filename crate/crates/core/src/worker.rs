//! Per-machine statistics: everything a worker computes from its own shard.
//!
//! The building block is the family of R-statistics, the empirical moments
//! of the top-`k` log-excesses over the `(k+1)`-th order statistic:
//!
//! ```text
//! R_k^(a) = (1/k) * sum_{i=1..k} (log M^(i) - log M^(k+1))^a,   a = 1, 2, 3
//! ```
//!
//! `R_k^(1)` is the Hill estimator. A ratio of power combinations of the
//! three moments (the T statistic) estimates the second order parameter
//! `rho`, which in turn feeds the bias-corrected estimator
//!
//! ```text
//! gamma~ = R^(1) - (R^(2) - 2 (R^(1))^2) / (2 R^(1) rho (1 - rho)^{-1})
//! ```
//!
//! All statistics depend on the data only through the exceedance ratios
//! `M^(i) / M^(k+1)`, so they are invariant under rescaling of the shard.

use crate::distributions::Shard;
use crate::error::WorkerError;

/// Below this magnitude a (non-positive) rho estimate is treated as
/// degenerate: the bias correction divides by `rho/(1 - rho)`.
pub const RHO_DEGENERACY_EPS: f64 = 1e-8;

/// What to do when the rho estimate degenerates (`T = 3`, zero denominator,
/// or `rho_hat` within [`RHO_DEGENERACY_EPS`] of zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhoPolicy {
    /// Surface the degeneracy as an error.
    #[default]
    Strict,
    /// Substitute `rho_hat = -1`, the conventional misspecification-robust
    /// fallback.
    FallbackMinusOne,
}

impl RhoPolicy {
    pub fn name(self) -> &'static str {
        match self {
            RhoPolicy::Strict => "strict",
            RhoPolicy::FallbackMinusOne => "fallback",
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "strict" => Some(RhoPolicy::Strict),
            "fallback" | "fallback-minus-one" => Some(RhoPolicy::FallbackMinusOne),
            _ => None,
        }
    }
}

/// The three log-excess moments of one shard at exceedance count `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RStats {
    pub k: usize,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl RStats {
    pub fn from_shard(shard: &Shard, k: usize) -> Result<Self, WorkerError> {
        let n = shard.len();
        if k == 0 || k + 1 > n {
            return Err(WorkerError::KOutOfRange { k, n });
        }
        let sorted = shard.sorted_desc();
        let threshold = sorted[k]; // M^(k+1)
        if !(threshold > 0.0) {
            return Err(WorkerError::NonPositiveValue(threshold));
        }
        let mut s1 = crate::numeric::KahanSum::new();
        let mut s2 = crate::numeric::KahanSum::new();
        let mut s3 = crate::numeric::KahanSum::new();
        for &v in &sorted[..k] {
            // ratio before log keeps the statistic a function of exceedance
            // ratios only
            let e = (v / threshold).ln();
            s1.add(e);
            s2.add(e * e);
            s3.add(e * e * e);
        }
        let kf = k as f64;
        Ok(Self { k, r1: s1.value() / kf, r2: s2.value() / kf, r3: s3.value() / kf })
    }
}

/// `R_k^(alpha)` for `alpha` in 1..=3.
pub fn r_stat(shard: &Shard, k: usize, alpha: u32) -> Result<f64, WorkerError> {
    let stats = RStats::from_shard(shard, k)?;
    match alpha {
        1 => Ok(stats.r1),
        2 => Ok(stats.r2),
        3 => Ok(stats.r3),
        other => Err(WorkerError::InvalidAlpha(other)),
    }
}

/// The Hill estimator of machine `j` at exceedance count `k`.
pub fn local_hill(shard: &Shard, k: usize) -> Result<f64, WorkerError> {
    r_stat(shard, k, 1)
}

/// The T statistic of a moment triple, with the log form as the `tau = 0`
/// continuity limit.
///
/// Requires strictly positive moments; a zero denominator (in particular,
/// moments sitting exactly on the limit curve `(g, 2g^2, 6g^3)`) is
/// [`WorkerError::DegenerateT`].
pub fn t_statistic(stats: &RStats, tau: f64) -> Result<f64, WorkerError> {
    if tau < 0.0 {
        return Err(WorkerError::NegativeTau(tau));
    }
    if !(stats.r1 > 0.0) || !(stats.r2 > 0.0) || !(stats.r3 > 0.0) {
        return Err(WorkerError::DegenerateT);
    }
    let (num, den) = if tau == 0.0 {
        let l1 = stats.r1.ln();
        let l2 = (stats.r2 / 2.0).ln() / 2.0;
        let l3 = (stats.r3 / 6.0).ln() / 3.0;
        (l1 - l2, l2 - l3)
    } else {
        let p1 = stats.r1.powf(tau);
        let p2 = (stats.r2 / 2.0).powf(tau / 2.0);
        let p3 = (stats.r3 / 6.0).powf(tau / 3.0);
        (p1 - p2, p2 - p3)
    };
    if den == 0.0 {
        return Err(WorkerError::DegenerateT);
    }
    let t = num / den;
    if !t.is_finite() {
        return Err(WorkerError::DegenerateT);
    }
    Ok(t)
}

/// Maps a T value to the second order parameter estimate `-3|(T-1)/(T-3)|`.
pub fn rho_from_t(t: f64) -> Result<f64, WorkerError> {
    if t == 3.0 {
        return Err(WorkerError::DegenerateT);
    }
    Ok(-3.0 * ((t - 1.0) / (t - 3.0)).abs())
}

/// Raw rho estimate from a moment triple (no degeneracy policy applied).
pub fn rho_estimate(stats: &RStats, tau: f64) -> Result<f64, WorkerError> {
    rho_from_t(t_statistic(stats, tau)?)
}

/// Applies the degeneracy policy to a raw rho estimate. Returns the usable
/// rho and whether the fallback value was substituted.
pub fn resolve_rho(
    raw: Result<f64, WorkerError>,
    policy: RhoPolicy,
) -> Result<(f64, bool), WorkerError> {
    match raw {
        Ok(rho) if rho <= -RHO_DEGENERACY_EPS => Ok((rho, false)),
        Ok(rho) => match policy {
            RhoPolicy::Strict => Err(WorkerError::RhoDegenerate { rho }),
            RhoPolicy::FallbackMinusOne => Ok((-1.0, true)),
        },
        Err(WorkerError::DegenerateT) => match policy {
            RhoPolicy::Strict => Err(WorkerError::DegenerateT),
            RhoPolicy::FallbackMinusOne => Ok((-1.0, true)),
        },
        Err(e) => Err(e),
    }
}

/// Second order parameter estimate from one shard at `k_rho`.
pub fn local_rho(
    shard: &Shard,
    k_rho: usize,
    tau: f64,
    policy: RhoPolicy,
) -> Result<f64, WorkerError> {
    let stats = RStats::from_shard(shard, k_rho)?;
    Ok(resolve_rho(rho_estimate(&stats, tau), policy)?.0)
}

/// The bias-corrected estimate from first and second log-excess moments and
/// a (negative) rho. Shared by the per-machine and the pooled estimators.
pub fn bias_corrected(r1: f64, r2: f64, rho: f64) -> Result<f64, WorkerError> {
    if !(rho < 0.0) {
        return Err(WorkerError::RhoDegenerate { rho });
    }
    Ok(r1 - (r2 - 2.0 * r1 * r1) / (2.0 * r1 * rho / (1.0 - rho)))
}

/// Per-machine bias-corrected estimate: rho estimated locally at `k_rho`,
/// correction applied to the moments at `k_n`.
pub fn local_bias_corrected(
    shard: &Shard,
    k_n: usize,
    k_rho: usize,
    tau: f64,
    policy: RhoPolicy,
) -> Result<f64, WorkerError> {
    check_k_order(k_n, k_rho, shard.len())?;
    let rho = local_rho(shard, k_rho, tau, policy)?;
    let stats = RStats::from_shard(shard, k_n)?;
    bias_corrected(stats.r1, stats.r2, rho)
}

fn check_k_order(k_n: usize, k_rho: usize, n: usize) -> Result<(), WorkerError> {
    if k_n == 0 || k_n >= k_rho || k_rho + 1 > n {
        return Err(WorkerError::KOrder { k_n, k_rho, n });
    }
    Ok(())
}

/// Transmission budget: how many statistics each machine may send.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransmissionMode {
    /// Moments at `k_n` and `k_rho`; 5 scalars.
    FiveStat,
    /// FiveStat plus the threshold order statistic `M^(k_n+1)`; 6 scalars.
    SixStat,
    /// Local rho estimate plus moments at `k_n`; 3 scalars.
    ThreeStat,
    /// Local bias-corrected estimate only; 1 scalar.
    OneStat,
}

impl TransmissionMode {
    pub fn scalar_budget(self) -> usize {
        match self {
            TransmissionMode::FiveStat => 5,
            TransmissionMode::SixStat => 6,
            TransmissionMode::ThreeStat => 3,
            TransmissionMode::OneStat => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransmissionMode::FiveStat => "five",
            TransmissionMode::SixStat => "six",
            TransmissionMode::ThreeStat => "three",
            TransmissionMode::OneStat => "one",
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "five" | "5" => Some(TransmissionMode::FiveStat),
            "six" | "6" => Some(TransmissionMode::SixStat),
            "three" | "3" => Some(TransmissionMode::ThreeStat),
            "one" | "1" => Some(TransmissionMode::OneStat),
            _ => None,
        }
    }
}

/// The statistics a machine transmits, by budget. Each variant carries
/// exactly the scalars of its mode plus the `(k_n, k_rho)` the caller
/// requested (configuration echo, not part of the budget).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SummaryPayload {
    FiveStat {
        k_n: usize,
        k_rho: usize,
        r1_kn: f64,
        r2_kn: f64,
        r1_krho: f64,
        r2_krho: f64,
        r3_krho: f64,
    },
    SixStat {
        k_n: usize,
        k_rho: usize,
        r1_kn: f64,
        r2_kn: f64,
        r1_krho: f64,
        r2_krho: f64,
        r3_krho: f64,
        threshold: f64,
    },
    ThreeStat {
        k_n: usize,
        k_rho: usize,
        local_rho: f64,
        r1_kn: f64,
        r2_kn: f64,
    },
    OneStat {
        k_n: usize,
        k_rho: usize,
        local_gamma: f64,
    },
}

impl SummaryPayload {
    pub fn mode(&self) -> TransmissionMode {
        match self {
            SummaryPayload::FiveStat { .. } => TransmissionMode::FiveStat,
            SummaryPayload::SixStat { .. } => TransmissionMode::SixStat,
            SummaryPayload::ThreeStat { .. } => TransmissionMode::ThreeStat,
            SummaryPayload::OneStat { .. } => TransmissionMode::OneStat,
        }
    }

    /// The transmitted statistics, in wire order.
    pub fn scalars(&self) -> Vec<f64> {
        match *self {
            SummaryPayload::FiveStat { r1_kn, r2_kn, r1_krho, r2_krho, r3_krho, .. } => {
                vec![r1_kn, r2_kn, r1_krho, r2_krho, r3_krho]
            }
            SummaryPayload::SixStat {
                r1_kn, r2_kn, r1_krho, r2_krho, r3_krho, threshold, ..
            } => vec![r1_kn, r2_kn, r1_krho, r2_krho, r3_krho, threshold],
            SummaryPayload::ThreeStat { local_rho, r1_kn, r2_kn, .. } => {
                vec![local_rho, r1_kn, r2_kn]
            }
            SummaryPayload::OneStat { local_gamma, .. } => vec![local_gamma],
        }
    }

    pub fn k_n(&self) -> usize {
        match *self {
            SummaryPayload::FiveStat { k_n, .. }
            | SummaryPayload::SixStat { k_n, .. }
            | SummaryPayload::ThreeStat { k_n, .. }
            | SummaryPayload::OneStat { k_n, .. } => k_n,
        }
    }

    pub fn k_rho(&self) -> usize {
        match *self {
            SummaryPayload::FiveStat { k_rho, .. }
            | SummaryPayload::SixStat { k_rho, .. }
            | SummaryPayload::ThreeStat { k_rho, .. }
            | SummaryPayload::OneStat { k_rho, .. } => k_rho,
        }
    }
}

/// What one machine sends to the central machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerSummary {
    pub machine_id: usize,
    /// Shard size, exchanged during the session handshake (needed for
    /// size-weighted aggregation); not counted against the budget.
    pub n_j: usize,
    pub payload: SummaryPayload,
}

impl WorkerSummary {
    pub fn mode(&self) -> TransmissionMode {
        self.payload.mode()
    }

    pub fn scalar_count(&self) -> usize {
        self.payload.scalars().len()
    }
}

/// Computes the summary a machine transmits under `mode`.
pub fn make_summary(
    shard: &Shard,
    k_n: usize,
    k_rho: usize,
    tau: f64,
    mode: TransmissionMode,
    policy: RhoPolicy,
) -> Result<WorkerSummary, WorkerError> {
    check_k_order(k_n, k_rho, shard.len())?;
    if tau < 0.0 {
        return Err(WorkerError::NegativeTau(tau));
    }
    let payload = match mode {
        TransmissionMode::FiveStat | TransmissionMode::SixStat => {
            let at_kn = RStats::from_shard(shard, k_n)?;
            let at_krho = RStats::from_shard(shard, k_rho)?;
            if mode == TransmissionMode::FiveStat {
                SummaryPayload::FiveStat {
                    k_n,
                    k_rho,
                    r1_kn: at_kn.r1,
                    r2_kn: at_kn.r2,
                    r1_krho: at_krho.r1,
                    r2_krho: at_krho.r2,
                    r3_krho: at_krho.r3,
                }
            } else {
                SummaryPayload::SixStat {
                    k_n,
                    k_rho,
                    r1_kn: at_kn.r1,
                    r2_kn: at_kn.r2,
                    r1_krho: at_krho.r1,
                    r2_krho: at_krho.r2,
                    r3_krho: at_krho.r3,
                    threshold: shard.sorted_desc()[k_n],
                }
            }
        }
        TransmissionMode::ThreeStat => {
            let at_kn = RStats::from_shard(shard, k_n)?;
            SummaryPayload::ThreeStat {
                k_n,
                k_rho,
                local_rho: local_rho(shard, k_rho, tau, policy)?,
                r1_kn: at_kn.r1,
                r2_kn: at_kn.r2,
            }
        }
        TransmissionMode::OneStat => SummaryPayload::OneStat {
            k_n,
            k_rho,
            local_gamma: local_bias_corrected(shard, k_n, k_rho, tau, policy)?,
        },
    };
    Ok(WorkerSummary { machine_id: shard.machine_id(), n_j: shard.len(), payload })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Shard;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    fn exp_shard() -> Shard {
        // {e^3, e^2, e, 1}: log-excesses over M^(3) = e at k = 2 are {2, 1}
        Shard::new(1, vec![3f64.exp(), 2f64.exp(), 1f64.exp(), 1.0]).unwrap()
    }

    #[test]
    fn r_stat_hand_values() {
        let s = exp_shard();
        assert!(close(r_stat(&s, 2, 1).unwrap(), 1.5));
        assert!(close(r_stat(&s, 2, 2).unwrap(), 2.5));
        assert!(close(r_stat(&s, 2, 3).unwrap(), 4.5));
        assert!(matches!(r_stat(&s, 2, 4), Err(WorkerError::InvalidAlpha(4))));
        assert!(matches!(r_stat(&s, 0, 1), Err(WorkerError::KOutOfRange { .. })));
        assert!(matches!(r_stat(&s, 4, 1), Err(WorkerError::KOutOfRange { .. })));
        // k = n - 1 thresholds on the shard minimum and stays finite
        assert!(r_stat(&s, 3, 1).unwrap().is_finite());
    }

    #[test]
    fn hill_is_scale_invariant_per_mode() {
        let s = exp_shard();
        let scaled = Shard::new(1, s.values().iter().map(|v| v * 7.3).collect()).unwrap();
        assert!(close(local_hill(&scaled, 2).unwrap(), 1.5));
    }

    #[test]
    fn all_ties_give_zero() {
        let s = Shard::new(1, vec![2.0; 5]).unwrap();
        assert_eq!(r_stat(&s, 3, 1).unwrap(), 0.0);
        assert_eq!(r_stat(&s, 3, 2).unwrap(), 0.0);
    }

    #[test]
    fn t_statistic_degenerates_on_limit_moments() {
        // Moments exactly on the limit curve (g, 2g^2, 6g^3) zero both the
        // numerator and the denominator: degenerate by construction.
        let stats = RStats { k: 10, r1: 2.0, r2: 8.0, r3: 48.0 };
        assert!(matches!(t_statistic(&stats, 1.0), Err(WorkerError::DegenerateT)));
        assert!(matches!(t_statistic(&stats, 0.0), Err(WorkerError::DegenerateT)));
        assert!(matches!(t_statistic(&stats, -0.5), Err(WorkerError::NegativeTau(_))));
    }

    #[test]
    fn t_statistic_frozen_evaluations() {
        // High-precision reference evaluations of the formula.
        let stats = RStats { k: 10, r1: 1.05, r2: 2.0, r3: 12.0 };
        assert!(close(t_statistic(&stats, 0.5).unwrap(), -0.20165493666718075));
        assert!(close(t_statistic(&stats, 0.0).unwrap(), -0.21116798367419382));
        // r2 = 2 r1^2 with r3 off the curve, tau = 0.5: numerator vanishes
        let on_curve = RStats { k: 10, r1: 1.0, r2: 2.0, r3: 12.0 };
        assert_eq!(t_statistic(&on_curve, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn rho_map_pinned_points() {
        assert!(close(rho_from_t(0.0).unwrap(), -1.0));
        assert!(close(rho_from_t(1.5).unwrap(), -1.0));
        assert!(close(rho_from_t(2.0).unwrap(), -3.0));
        assert!(matches!(rho_from_t(3.0), Err(WorkerError::DegenerateT)));
        // output is never positive
        for t in [-10.0, 0.0, 0.9, 1.0, 2.9, 3.1, 100.0] {
            assert!(rho_from_t(t).unwrap() <= 0.0);
        }
    }

    #[test]
    fn resolve_rho_policies() {
        assert_eq!(resolve_rho(Ok(-0.7), RhoPolicy::Strict).unwrap(), (-0.7, false));
        assert!(matches!(
            resolve_rho(Ok(-1e-12), RhoPolicy::Strict),
            Err(WorkerError::RhoDegenerate { .. })
        ));
        assert_eq!(resolve_rho(Ok(-1e-12), RhoPolicy::FallbackMinusOne).unwrap(), (-1.0, true));
        assert_eq!(
            resolve_rho(Err(WorkerError::DegenerateT), RhoPolicy::FallbackMinusOne).unwrap(),
            (-1.0, true)
        );
        assert!(matches!(
            resolve_rho(Err(WorkerError::DegenerateT), RhoPolicy::Strict),
            Err(WorkerError::DegenerateT)
        ));
    }

    #[test]
    fn bias_corrected_hand_values() {
        assert!(close(bias_corrected(1.0, 2.0, -1.0).unwrap(), 1.0));
        assert!(close(bias_corrected(1.1, 2.6, -1.0).unwrap(), 139.0 / 110.0));
        // correction numerator vanishes on the exact power-law curve
        for gamma in [0.3, 1.0, 4.2] {
            for rho in [-0.4, -1.0, -3.0] {
                assert!(close(bias_corrected(gamma, 2.0 * gamma * gamma, rho).unwrap(), gamma));
            }
        }
        assert!(bias_corrected(1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn summary_budgets() {
        let values: Vec<f64> = (1..=40).map(|i| (i as f64).powf(1.7)).collect();
        let shard = Shard::new(3, values).unwrap();
        let cases = [
            (TransmissionMode::FiveStat, 5),
            (TransmissionMode::SixStat, 6),
            (TransmissionMode::ThreeStat, 3),
            (TransmissionMode::OneStat, 1),
        ];
        for (mode, budget) in cases {
            let s = make_summary(&shard, 5, 20, 0.5, mode, RhoPolicy::Strict).unwrap();
            assert_eq!(s.scalar_count(), budget);
            assert_eq!(s.mode(), mode);
            assert_eq!(s.machine_id, 3);
            assert_eq!(s.n_j, 40);
        }
        assert!(matches!(
            make_summary(&shard, 20, 5, 0.5, TransmissionMode::FiveStat, RhoPolicy::Strict),
            Err(WorkerError::KOrder { .. })
        ));
        assert!(matches!(
            make_summary(&shard, 5, 40, 0.5, TransmissionMode::FiveStat, RhoPolicy::Strict),
            Err(WorkerError::KOrder { .. })
        ));
    }

    #[test]
    fn six_stat_threshold_is_order_statistic() {
        let shard = Shard::new(1, vec![10.0, 8.0, 5.0, 3.0, 2.0, 1.0]).unwrap();
        let s = make_summary(&shard, 2, 4, 0.5, TransmissionMode::SixStat, RhoPolicy::FallbackMinusOne)
            .unwrap();
        match s.payload {
            SummaryPayload::SixStat { threshold, .. } => assert_eq!(threshold, 5.0),
            _ => panic!("wrong payload"),
        }
    }
}
