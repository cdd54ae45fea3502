//! Heavy-tailed sample generation.
//!
//! Observations are produced by pushing Pareto(1) variables through a tail
//! quantile function `U`: if `Y` has distribution function `1 - 1/y` on
//! `[1, inf)` then `U(Y)` has the target distribution. The three study
//! distributions share extreme value index `gamma = 1` but differ in their
//! second and third order parameters, which control how fast the tail
//! approaches the limiting power law:
//!
//! | distribution    | gamma | rho  | rho_tilde |
//! |-----------------|-------|------|-----------|
//! | Frechet         | 1     | -1   | -1        |
//! | Burr            | 1     | -1/2 | -1/2      |
//! | absolute Cauchy | 1     | -2   | -4        |

use crate::error::DistError;
use crate::rng::{substream_seed, Xoshiro256StarStar};

/// Built-in tail families plus a user-supplied quantile table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    Frechet,
    Burr,
    AbsCauchy,
    UserQuantile,
}

impl DistributionKind {
    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::Frechet => "frechet",
            DistributionKind::Burr => "burr",
            DistributionKind::AbsCauchy => "abs-cauchy",
            DistributionKind::UserQuantile => "user-quantile",
        }
    }
}

/// First, second and third order tail indices of the built-in families.
pub fn table1_params(kind: DistributionKind) -> Result<(f64, f64, f64), DistError> {
    match kind {
        DistributionKind::Frechet => Ok((1.0, -1.0, -1.0)),
        DistributionKind::Burr => Ok((1.0, -0.5, -0.5)),
        DistributionKind::AbsCauchy => Ok((1.0, -2.0, -4.0)),
        DistributionKind::UserQuantile => {
            Err(DistError::UnknownDistribution("user-quantile".into()))
        }
    }
}

/// Maps a uniform draw to a Pareto(1) variable via `1/(1-u)`.
pub fn pareto1_from_uniform(u: f64) -> Result<f64, DistError> {
    if !(0.0..1.0).contains(&u) {
        return Err(DistError::UniformOutOfRange(u));
    }
    Ok(1.0 / (1.0 - u))
}

/// Tabulated quantile function, interpolated monotonically in log-log space.
/// Outside the grid, the edge segments extrapolate (the slope of the last
/// segment is the effective tail index).
#[derive(Debug, Clone)]
pub struct QuantileTable {
    log_t: Vec<f64>,
    log_u: Vec<f64>,
}

impl QuantileTable {
    pub fn new(points: &[(f64, f64)]) -> Result<Self, DistError> {
        if points.len() < 2 {
            return Err(DistError::InvalidTable("need at least two points".into()));
        }
        let mut log_t = Vec::with_capacity(points.len());
        let mut log_u = Vec::with_capacity(points.len());
        for &(t, u) in points {
            if !(t > 1.0) || !t.is_finite() {
                return Err(DistError::InvalidTable(format!("grid point t = {t} not in (1, inf)")));
            }
            if !(u > 0.0) || !u.is_finite() {
                return Err(DistError::InvalidTable(format!("grid value U = {u} not positive")));
            }
            log_t.push(t.ln());
            log_u.push(u.ln());
        }
        for w in log_t.windows(2) {
            if w[1] <= w[0] {
                return Err(DistError::InvalidTable("t grid must be strictly increasing".into()));
            }
        }
        for w in log_u.windows(2) {
            if w[1] <= w[0] {
                return Err(DistError::InvalidTable("U values must be strictly increasing".into()));
            }
        }
        Ok(Self { log_t, log_u })
    }

    fn eval(&self, t: f64) -> f64 {
        let lt = t.ln();
        // segment index: last i with log_t[i] <= lt, clamped to interior
        let i = match self.log_t.binary_search_by(|x| x.partial_cmp(&lt).unwrap()) {
            Ok(i) => i.min(self.log_t.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.log_t.len() - 2),
        };
        let slope = (self.log_u[i + 1] - self.log_u[i]) / (self.log_t[i + 1] - self.log_t[i]);
        (self.log_u[i] + slope * (lt - self.log_t[i])).exp()
    }
}

/// A heavy-tailed model: a tail quantile function together with its tail
/// indices `(gamma, rho, rho_tilde)`.
#[derive(Debug, Clone)]
pub struct TailDistribution {
    kind: DistributionKind,
    gamma: f64,
    rho: f64,
    rho_tilde: f64,
    table: Option<QuantileTable>,
}

impl TailDistribution {
    pub fn frechet() -> Self {
        let (gamma, rho, rho_tilde) = table1_params(DistributionKind::Frechet).unwrap();
        Self { kind: DistributionKind::Frechet, gamma, rho, rho_tilde, table: None }
    }

    pub fn burr() -> Self {
        let (gamma, rho, rho_tilde) = table1_params(DistributionKind::Burr).unwrap();
        Self { kind: DistributionKind::Burr, gamma, rho, rho_tilde, table: None }
    }

    pub fn abs_cauchy() -> Self {
        let (gamma, rho, rho_tilde) = table1_params(DistributionKind::AbsCauchy).unwrap();
        Self { kind: DistributionKind::AbsCauchy, gamma, rho, rho_tilde, table: None }
    }

    /// External distribution plugged in as a tabulated quantile grid.
    pub fn from_table(
        points: &[(f64, f64)],
        gamma: f64,
        rho: f64,
        rho_tilde: f64,
    ) -> Result<Self, DistError> {
        if !(gamma > 0.0) {
            return Err(DistError::InvalidTable(format!("gamma = {gamma} must be positive")));
        }
        if rho > 0.0 || rho_tilde > 0.0 {
            return Err(DistError::InvalidTable("rho and rho_tilde must be <= 0".into()));
        }
        Ok(Self {
            kind: DistributionKind::UserQuantile,
            gamma,
            rho,
            rho_tilde,
            table: Some(QuantileTable::new(points)?),
        })
    }

    pub fn by_name(name: &str) -> Result<Self, DistError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "frechet" => Ok(Self::frechet()),
            "burr" => Ok(Self::burr()),
            "abs-cauchy" | "abscauchy" | "cauchy" => Ok(Self::abs_cauchy()),
            other => Err(DistError::UnknownDistribution(other.to_string())),
        }
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn rho_tilde(&self) -> f64 {
        self.rho_tilde
    }

    /// Tail quantile `U(t) = F^{-1}(1 - 1/t)` for `t > 1`.
    pub fn tail_quantile(&self, t: f64) -> Result<f64, DistError> {
        if !(t > 1.0) {
            return Err(DistError::QuantileDomain(t));
        }
        Ok(match self.kind {
            // F(x) = exp(-1/x): U(t) = -1/log(1 - 1/t)
            DistributionKind::Frechet => -1.0 / (-1.0 / t).ln_1p(),
            // 1 - F(x) = (1 + sqrt(x))^{-2}: U(t) = (sqrt(t) - 1)^2
            DistributionKind::Burr => {
                let s = t.sqrt() - 1.0;
                s * s
            }
            // F(x) = (2/pi) atan(x): U(t) = tan((pi/2)(1 - 1/t))
            DistributionKind::AbsCauchy => (std::f64::consts::FRAC_PI_2 * (1.0 - 1.0 / t)).tan(),
            DistributionKind::UserQuantile => self.table.as_ref().unwrap().eval(t),
        })
    }
}

/// How `N` observations are laid out over `m` machines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardPlan {
    pub m: usize,
    pub sizes: Vec<usize>,
    pub master_seed: u64,
}

impl ShardPlan {
    /// Equal layout: `total` observations split evenly over `m` machines.
    pub fn equal(m: usize, total: usize, master_seed: u64) -> Result<Self, DistError> {
        if m == 0 {
            return Err(DistError::InvalidPlan("m must be positive".into()));
        }
        if total % m != 0 {
            return Err(DistError::InvalidPlan(format!(
                "total size {total} not divisible by m = {m}"
            )));
        }
        Self::with_sizes(vec![total / m; m], master_seed)
    }

    pub fn with_sizes(sizes: Vec<usize>, master_seed: u64) -> Result<Self, DistError> {
        if sizes.is_empty() {
            return Err(DistError::InvalidPlan("no machines".into()));
        }
        if let Some(&n) = sizes.iter().find(|&&n| n < 2) {
            return Err(DistError::InvalidPlan(format!("machine size {n} < 2")));
        }
        Ok(Self { m: sizes.len(), sizes, master_seed })
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }
}

/// One machine's raw observations plus its sorted-descending view.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    machine_id: usize,
    values: Vec<f64>,
    sorted_desc: Vec<f64>,
}

impl Shard {
    /// Builds a shard, rejecting non-positive or non-finite observations
    /// (log-excesses must exist).
    pub fn new(machine_id: usize, values: Vec<f64>) -> Result<Self, DistError> {
        if let Some(&bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(DistError::NonPositiveValue(bad));
        }
        let mut sorted_desc = values.clone();
        sorted_desc.sort_unstable_by(|a, b| b.total_cmp(a));
        Ok(Self { machine_id, values, sorted_desc })
    }

    pub fn machine_id(&self) -> usize {
        self.machine_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Order statistics, largest first: index `i` holds `M^{(i+1)}`.
    pub fn sorted_desc(&self) -> &[f64] {
        &self.sorted_desc
    }
}

/// Generates the shards of replication `rep` under `plan`.
///
/// Observation `i` of machine `j` is `U(1/(1-u))` with `u` drawn from the
/// xoshiro256** substream seeded by `substream_seed(master_seed, rep, j)`.
/// The output is a pure function of `(dist, plan, rep)`; machines (and whole
/// replications) can be generated concurrently. Note that plans with
/// different machine counts partition the randomness differently, so e.g.
/// concatenating the shards of an `m = 2` plan does not reproduce the single
/// shard of the `m = 1` plan with the same total size and seed.
pub fn generate_shards_rep(dist: &TailDistribution, plan: &ShardPlan, rep: u64) -> Vec<Shard> {
    plan.sizes
        .iter()
        .enumerate()
        .map(|(idx, &n)| {
            let machine_id = idx + 1;
            let mut rng =
                Xoshiro256StarStar::from_seed(substream_seed(plan.master_seed, rep, machine_id as u64));
            let values: Vec<f64> = (0..n)
                .map(|_| {
                    let u = rng.next_uniform_open();
                    let y = 1.0 / (1.0 - u); // Pareto(1), finite since u < 1 - 2^-53
                    dist.tail_quantile(y).expect("y > 1 by construction")
                })
                .collect();
            Shard::new(machine_id, values).expect("quantile values are positive")
        })
        .collect()
}

/// [`generate_shards_rep`] at replication 0.
pub fn generate_shards(dist: &TailDistribution, plan: &ShardPlan) -> Vec<Shard> {
    generate_shards_rep(dist, plan, 0)
}
