//! Closed-form theory layer: finite-sample factors, asymptotic bias and
//! variance, limit covariances, GPD moments, and optimal exceedance counts.
//!
//! These quantities power diagnostics and serve as oracles for the Monte
//! Carlo tests, so the numerics keep headroom over the test tolerances:
//! the factor
//!
//! ```text
//! g(k, n, rho) = (k/n)^rho * Gamma(n+1) Gamma(k-rho+1) / (Gamma(n-rho+1) Gamma(k+1))
//! ```
//!
//! is evaluated through *differences* of log-gamma values. For large
//! arguments the difference is computed directly from the Stirling series,
//! never by subtracting two O(10^10) logs, which keeps the relative error of
//! `g` at the 1e-13 level for `k, n` up to 1e9 and `|rho|` up to 50.

use crate::error::TheoryError;

/// Stirling series coefficients `B_{2i} / (2i (2i-1))` for i = 1..=7.
const STIRLING: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Tail sum of the Stirling series at `x` (valid for `x >= 10`).
fn stirling_series(x: f64) -> f64 {
    let inv2 = 1.0 / (x * x);
    let mut term = 1.0 / x;
    let mut sum = 0.0;
    for c in STIRLING {
        sum += c * term;
        term *= inv2;
    }
    sum
}

/// Natural log of the gamma function for `x > 0`.
///
/// Arguments below 10 are shifted up with the recurrence
/// `Gamma(x) = Gamma(x + k) / (x (x+1) ... (x+k-1))` and evaluated by the
/// Stirling series at the shifted point.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0 && x.is_finite(), "ln_gamma domain: x = {x}");
    let mut shift_product = 1.0;
    let mut z = x;
    while z < 10.0 {
        shift_product *= z;
        z += 1.0;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_TWO_PI + stirling_series(z) - shift_product.ln()
}

/// `ln Gamma(x + d) - ln Gamma(x)` for `x >= 1`, `d >= 0`, computed without
/// cancellation for large `x`.
fn ln_gamma_ratio(x: f64, d: f64) -> f64 {
    debug_assert!(x >= 1.0 && d >= 0.0);
    if d == 0.0 {
        return 0.0;
    }
    if x < 10.0 {
        // both arguments small enough for direct evaluation
        return ln_gamma(x + d) - ln_gamma(x);
    }
    // (x+d-1/2) ln(x+d) - (x-1/2) ln x - d, regrouped through ln1p to avoid
    // differencing two large logs
    let main = (x - 0.5) * (d / x).ln_1p() + d * (x + d).ln() - d;
    main + stirling_series(x + d) - stirling_series(x)
}

/// The finite-sample expectation factor `g(k, n, rho)`.
pub fn g_exact(k: u64, n: u64, rho: f64) -> Result<f64, TheoryError> {
    if k == 0 || k > n {
        return Err(TheoryError::KExceedsN { k, n });
    }
    if rho > 0.0 || !rho.is_finite() {
        return Err(TheoryError::RhoPositive(rho));
    }
    let (kf, nf) = (k as f64, n as f64);
    let ln_g = rho * (kf.ln() - nf.ln()) + ln_gamma_ratio(kf + 1.0, -rho)
        - ln_gamma_ratio(nf + 1.0, -rho);
    Ok(ln_g.exp())
}

/// Limit of `g(k, n, rho)` as `n` grows with `k` fixed:
/// `k^rho Gamma(k - rho + 1) / Gamma(k + 1)`.
pub fn g_fixed_k_limit(k: u64, rho: f64) -> Result<f64, TheoryError> {
    if k == 0 {
        return Err(TheoryError::KExceedsN { k, n: 0 });
    }
    if rho > 0.0 || !rho.is_finite() {
        return Err(TheoryError::RhoPositive(rho));
    }
    let kf = k as f64;
    Ok((rho * kf.ln() + ln_gamma_ratio(kf + 1.0, -rho)).exp())
}

/// Three-term expansion of `g` for intermediate `k`:
/// `1 + (rho^2 - rho)/(2k) - (rho^2 - rho)/(2(n - rho))`.
pub fn g_expansion(k: u64, n: u64, rho: f64) -> Result<f64, TheoryError> {
    if k == 0 || k > n {
        return Err(TheoryError::KExceedsN { k, n });
    }
    if rho > 0.0 || !rho.is_finite() {
        return Err(TheoryError::RhoPositive(rho));
    }
    let c = 0.5 * (rho * rho - rho);
    Ok(1.0 + c / k as f64 - c / (n as f64 - rho))
}

/// Parametric tail model `A(t) = c_A t^rho`, `B(t) = c_B t^rho_tilde` on top
/// of the index `gamma`; drives the closed-form bias predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryModel {
    pub gamma: f64,
    pub rho: f64,
    pub rho_tilde: f64,
    pub c_a: f64,
    pub c_b: f64,
}

impl TheoryModel {
    pub fn new(gamma: f64, rho: f64, rho_tilde: f64, c_a: f64, c_b: f64) -> Result<Self, TheoryError> {
        if !(gamma > 0.0) {
            return Err(TheoryError::InvalidModel(format!("gamma = {gamma} must be positive")));
        }
        if !(rho < 0.0) {
            return Err(TheoryError::InvalidModel(format!("rho = {rho} must be negative")));
        }
        if rho_tilde > 0.0 {
            return Err(TheoryError::InvalidModel(format!(
                "rho_tilde = {rho_tilde} must be non-positive"
            )));
        }
        Ok(Self { gamma, rho, rho_tilde, c_a, c_b })
    }
}

/// Asymptotic bias of the distributed Hill estimator at `(k, n)`:
/// `A(n/k) g(k, n, rho) / (1 - rho)`.
pub fn dh_asymptotic_bias(model: &TheoryModel, k: u64, n: u64) -> Result<f64, TheoryError> {
    let a = model.c_a * (n as f64 / k as f64).powf(model.rho);
    Ok(a * g_exact(k, n, model.rho)? / (1.0 - model.rho))
}

/// Asymptotic variance factor of the bias-corrected estimator:
/// `gamma^2 (1 + (1/rho - 1)^2)`. The variance of the estimator itself is
/// this divided by `k_n m`.
pub fn unbiased_asymptotic_variance(gamma: f64, rho: f64) -> Result<f64, TheoryError> {
    if !(rho < 0.0) {
        return Err(TheoryError::RhoNotNegative(rho));
    }
    let d = 1.0 / rho - 1.0;
    Ok(gamma * gamma * (1.0 + d * d))
}

/// Limit covariance of the joint fluctuations of the three pooled
/// R-statistics: the covariance matrix of `(E, E^2, E^3)` for a standard
/// exponential `E`, i.e. entries `(a+b)! - a! b!`.
pub fn limit_covariance() -> [[f64; 3]; 3] {
    [[1.0, 4.0, 18.0], [4.0, 20.0, 108.0], [18.0, 108.0, 684.0]]
}

/// Joint limit behavior of the estimator at `(k, n)` under a parametric
/// tail model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitLaw {
    /// Asymptotic bias of the distributed Hill estimator.
    pub mean_shift: f64,
    /// Variance factor of the bias-corrected estimator.
    pub variance: f64,
    /// Limit covariance of the three pooled R-statistics.
    pub covariance3: [[f64; 3]; 3],
}

impl LimitLaw {
    pub fn for_model(model: &TheoryModel, k: u64, n: u64) -> Result<Self, TheoryError> {
        Ok(Self {
            mean_shift: dh_asymptotic_bias(model, k, n)?,
            variance: unbiased_asymptotic_variance(model.gamma, model.rho)?,
            covariance3: limit_covariance(),
        })
    }
}

/// Raw moments of the generalized Pareto distribution with shape `rho < 0`:
/// `E T^a = a! / ((1 - a rho) ... (1 - rho))` for `a` in 1..=4.
pub fn gpd_raw_moment(a: u32, rho: f64) -> Result<f64, TheoryError> {
    if !(1..=4).contains(&a) {
        return Err(TheoryError::InvalidMomentOrder(a));
    }
    if !(rho < 0.0) {
        return Err(TheoryError::RhoNotNegative(rho));
    }
    let mut numerator = 1.0f64;
    let mut denominator = 1.0f64;
    for i in 1..=a {
        numerator *= i as f64;
        denominator *= 1.0 - i as f64 * rho;
    }
    Ok(numerator / denominator)
}

/// Two-term expansion of the moments of the averaged GPD excess `Z_k`:
/// `E Z_k^a = (1 - rho)^{-a} (1 + a(a-1) / (2 (1 - 2 rho) k))`.
pub fn zk_moment_expansion(a: u32, k: u64, rho: f64) -> Result<f64, TheoryError> {
    if !(1..=4).contains(&a) {
        return Err(TheoryError::InvalidMomentOrder(a));
    }
    if !(rho < 0.0) {
        return Err(TheoryError::RhoNotNegative(rho));
    }
    if k == 0 {
        return Err(TheoryError::KExceedsN { k, n: 0 });
    }
    let af = a as f64;
    let lead = (1.0 - rho).powi(-(a as i32));
    Ok(lead * (1.0 + af * (af - 1.0) / (2.0 * (1.0 - 2.0 * rho) * k as f64)))
}

/// Rate-optimal exceedance count for the distributed bias-corrected
/// estimator, as a real number before rounding:
/// `N^{-2 rho* / (1 - 2 rho*)} / m` with `rho* = rho + max(rho, rho_tilde)`.
///
/// The rate carries a unit constant; only the order is meaningful.
pub fn optimal_kn_rate(n_total: u64, m: u64, rho: f64, rho_tilde: f64) -> Result<f64, TheoryError> {
    if !(rho < 0.0) {
        return Err(TheoryError::RhoNotNegative(rho));
    }
    let rho_star = rho + rho.max(rho_tilde);
    let exponent = -2.0 * rho_star / (1.0 - 2.0 * rho_star);
    Ok((n_total as f64).powf(exponent) / m as f64)
}

/// [`optimal_kn_rate`] rounded and clamped to the usable range `[1, n-1]`
/// with `n = N/m`.
pub fn optimal_kn_dc(n_total: u64, m: u64, rho: f64, rho_tilde: f64) -> Result<u64, TheoryError> {
    let rate = optimal_kn_rate(n_total, m, rho, rho_tilde)?.round();
    let n = (n_total / m).max(2);
    Ok((rate as u64).clamp(1, n - 1))
}
