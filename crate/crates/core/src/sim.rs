//! Monte Carlo experiment driver.
//!
//! A run sweeps (machine count, exceedance count, tau) cells over `r`
//! independent replications, evaluating every selected estimator on the
//! same generated data per replication, and reduces to bias / RMSE /
//! empirical variance per cell. Replications are scheduled in parallel;
//! outcomes are reduced in replication order, so reports are byte-identical
//! regardless of thread count.

use rayon::prelude::*;

use crate::central::{EstimatorConfig, Weighting};
use crate::distributions::{generate_shards_rep, ShardPlan, TailDistribution};
use crate::error::{ConfigError, SimError};
use crate::estimator::EstimatorRegistry;
use crate::numeric::{fnv1a64, KahanSum};
use crate::worker::{make_summary, RhoPolicy};

/// How `k_rho` is chosen per machine count.
#[derive(Debug, Clone, PartialEq)]
pub enum KrhoRule {
    /// `k_rho = floor(n^exponent)` with `n = N/m`.
    Exponent(f64),
    /// Explicit values, parallel to `m_list`.
    PerMachineCount(Vec<usize>),
}

/// Full description of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub distribution: TailDistribution,
    pub n_total: usize,
    pub m_list: Vec<usize>,
    pub kn_grid: Vec<usize>,
    pub krho_rule: KrhoRule,
    pub tau_list: Vec<f64>,
    pub replications: usize,
    pub master_seed: u64,
    /// Registry names of the estimators to evaluate.
    pub estimators: Vec<String>,
    pub rho_policy: RhoPolicy,
    pub weighting: Weighting,
    pub p_n: Option<f64>,
}

impl ExperimentConfig {
    /// Baseline experiment: every field except the distribution and seed at
    /// its default.
    pub fn new(distribution: TailDistribution, master_seed: u64) -> Self {
        let mut cfg = Self {
            distribution,
            n_total: 10_000,
            m_list: vec![1, 20, 100],
            kn_grid: Vec::new(),
            krho_rule: KrhoRule::Exponent(0.98),
            tau_list: vec![0.0, 0.5, 1.0],
            replications: 200,
            master_seed,
            estimators: vec!["dh".into(), "unbiased".into()],
            rho_policy: RhoPolicy::Strict,
            weighting: Weighting::EqualMean,
            p_n: None,
        };
        cfg.kn_grid = cfg.default_kn_grid();
        cfg
    }

    pub fn krho_for(&self, m: usize) -> usize {
        let n = self.n_total / m;
        match &self.krho_rule {
            KrhoRule::Exponent(e) => (n as f64).powf(*e).floor() as usize,
            KrhoRule::PerMachineCount(list) => {
                let idx = self.m_list.iter().position(|&mm| mm == m).unwrap_or(0);
                list[idx]
            }
        }
    }

    /// Geometric grid from 10 up to `n/2`, capped below `k_rho`, for the
    /// largest machine count (the binding constraint).
    pub fn default_kn_grid(&self) -> Vec<usize> {
        let cap = self
            .m_list
            .iter()
            .map(|&m| {
                let n = self.n_total / m;
                (n / 2).min(self.krho_for(m).saturating_sub(1))
            })
            .min()
            .unwrap_or(10)
            .max(2);
        let mut grid = Vec::new();
        let mut k = 10.0f64.min(cap as f64);
        while (k as usize) < cap {
            grid.push(k as usize);
            k *= std::f64::consts::SQRT_2;
        }
        grid.push(cap);
        grid.dedup();
        grid
    }

    /// Parses the flat `key = value` config format (see the repository
    /// README for the field list). Unknown keys are rejected.
    pub fn from_key_values(text: &str) -> Result<Self, SimError> {
        let mut dist: Option<TailDistribution> = None;
        let mut seed: u64 = 0;
        let mut fields: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: i + 1,
                reason: "expected `key = value`".into(),
            })?;
            fields.push((i + 1, key.trim().to_string(), value.trim().to_string()));
        }
        for (line, key, value) in &fields {
            if key == "distribution" {
                dist = Some(TailDistribution::by_name(value).map_err(|e| ConfigError::Parse {
                    line: *line,
                    reason: e.to_string(),
                })?);
            } else if key == "master_seed" {
                seed = parse_field(*line, key, value)?;
            }
        }
        let mut cfg = Self::new(dist.ok_or(ConfigError::Missing("distribution"))?, seed);
        let mut explicit_grid = false;
        for (line, key, value) in fields {
            match key.as_str() {
                "distribution" | "master_seed" => {}
                "n_total" => cfg.n_total = parse_field(line, &key, &value)?,
                "m_list" => cfg.m_list = parse_list(line, &key, &value)?,
                "kn_grid" => {
                    cfg.kn_grid = parse_list(line, &key, &value)?;
                    explicit_grid = true;
                }
                "krho_exponent" => cfg.krho_rule = KrhoRule::Exponent(parse_field(line, &key, &value)?),
                "krho_list" => cfg.krho_rule = KrhoRule::PerMachineCount(parse_list(line, &key, &value)?),
                "tau_list" => cfg.tau_list = parse_list(line, &key, &value)?,
                "replications" => cfg.replications = parse_field(line, &key, &value)?,
                "estimators" => {
                    cfg.estimators = value.split(',').map(|s| s.trim().to_string()).collect()
                }
                "rho_policy" => {
                    cfg.rho_policy = RhoPolicy::by_name(&value).ok_or(ConfigError::Parse {
                        line,
                        reason: format!("unknown rho policy `{value}`"),
                    })?
                }
                "weighting" => {
                    cfg.weighting = Weighting::by_name(&value).ok_or(ConfigError::Parse {
                        line,
                        reason: format!("unknown weighting `{value}`"),
                    })?
                }
                "p_n" => {
                    cfg.p_n = if value.is_empty() {
                        None
                    } else {
                        Some(parse_field(line, &key, &value)?)
                    }
                }
                other => {
                    return Err(SimError::Config(ConfigError::Parse {
                        line,
                        reason: format!("unknown key `{other}`"),
                    }))
                }
            }
        }
        if !explicit_grid {
            cfg.kn_grid = cfg.default_kn_grid();
        }
        Ok(cfg)
    }

    /// Checks the grid constraints; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        if self.replications == 0 {
            return Err(ConfigError::Invalid { field: "replications", reason: "must be positive".into() });
        }
        if self.m_list.is_empty() {
            return Err(ConfigError::Invalid { field: "m_list", reason: "must be non-empty".into() });
        }
        if self.kn_grid.is_empty() {
            return Err(ConfigError::Invalid { field: "kn_grid", reason: "must be non-empty".into() });
        }
        if let KrhoRule::PerMachineCount(list) = &self.krho_rule {
            if list.len() != self.m_list.len() {
                return Err(ConfigError::Invalid {
                    field: "krho_list",
                    reason: format!("{} entries for {} machine counts", list.len(), self.m_list.len()),
                });
            }
        }
        for &m in &self.m_list {
            if m == 0 || self.n_total % m != 0 {
                return Err(ConfigError::Invalid {
                    field: "m_list",
                    reason: format!("n_total = {} not divisible by m = {m}", self.n_total),
                });
            }
            let n = self.n_total / m;
            let krho = self.krho_for(m);
            if krho + 1 > n {
                return Err(ConfigError::Invalid {
                    field: "krho",
                    reason: format!("k_rho = {krho} too large for shard size {n} (m = {m})"),
                });
            }
            let max_kn = *self.kn_grid.iter().max().unwrap();
            if max_kn >= krho {
                return Err(ConfigError::Invalid {
                    field: "kn_grid",
                    reason: format!("max k_n = {max_kn} must stay below k_rho = {krho} (m = {m})"),
                });
            }
        }
        for &tau in &self.tau_list {
            if tau < 0.0 {
                return Err(ConfigError::Invalid {
                    field: "tau_list",
                    reason: format!("tau = {tau} is negative"),
                });
            }
        }
        let mut warnings = Vec::new();
        for &tau in &self.tau_list {
            if tau > 1.0 {
                warnings.push(format!("tau = {tau} is outside the recommended range [0, 1]"));
            }
        }
        Ok(warnings)
    }

    /// Stable fingerprint of the configuration, recorded in report metadata.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(self.canonical_text().as_bytes())
    }

    fn canonical_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = write!(
            s,
            "distribution={};n_total={};m_list={:?};kn_grid={:?};krho={:?};tau_list={:?};r={};seed={};estimators={:?};policy={};weighting={};p_n={:?}",
            self.distribution.name(),
            self.n_total,
            self.m_list,
            self.kn_grid,
            self.krho_rule,
            self.tau_list,
            self.replications,
            self.master_seed,
            self.estimators,
            self.rho_policy.name(),
            self.weighting.name(),
            self.p_n,
        );
        s
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Parse {
        line,
        reason: format!("cannot parse `{value}` for `{key}`"),
    })
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value.split(',').map(|v| parse_field(line, key, v.trim())).collect()
}

/// One estimator evaluation in one replication cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub m: usize,
    pub k_n: usize,
    pub tau: f64,
    pub estimator: String,
    /// The estimate, or the failure it hit (degenerate rho under the strict
    /// policy, mostly).
    pub outcome: Result<f64, String>,
}

/// All cells of one replication, in deterministic (m, k_n, tau, estimator)
/// order.
#[derive(Debug, Clone)]
pub struct ReplicationOutcome {
    pub rep: u64,
    pub cells: Vec<CellOutcome>,
}

/// Runs one replication: generates shards once per machine count, sorts
/// once, then evaluates every (k_n, tau, estimator) cell on the same data.
pub fn run_replication(
    config: &ExperimentConfig,
    registry: &EstimatorRegistry,
    rep: u64,
) -> Result<ReplicationOutcome, SimError> {
    let mut cells = Vec::new();
    for &m in &config.m_list {
        let plan = ShardPlan::equal(m, config.n_total, config.master_seed)?;
        let shards = generate_shards_rep(&config.distribution, &plan, rep);
        let k_rho = config.krho_for(m);
        for &k_n in &config.kn_grid {
            for &tau in &config.tau_list {
                let est_config = EstimatorConfig {
                    k_n,
                    k_rho,
                    tau,
                    mode: crate::worker::TransmissionMode::FiveStat,
                    rho_policy: config.rho_policy,
                    weighting: config.weighting,
                };
                for name in &config.estimators {
                    let est = registry
                        .get(name)
                        .ok_or_else(|| SimError::UnknownEstimator(name.clone()))?;
                    let mode = est.required_mode();
                    let est_config = EstimatorConfig { mode, ..est_config };
                    let outcome = shards
                        .iter()
                        .map(|s| make_summary(s, k_n, k_rho, tau, mode, config.rho_policy))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| e.to_string())
                        .and_then(|summaries| {
                            est.estimate(&summaries, &est_config).map_err(|e| e.to_string())
                        });
                    cells.push(CellOutcome {
                        m,
                        k_n,
                        tau,
                        estimator: name.clone(),
                        outcome,
                    });
                }
            }
        }
    }
    Ok(ReplicationOutcome { rep, cells })
}

/// One row of the experiment report: moments of one estimator in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub distribution: String,
    pub m: usize,
    pub k_n: usize,
    pub tau: f64,
    pub estimator: String,
    pub bias: f64,
    pub abs_bias: f64,
    pub rmse: f64,
    pub emp_variance: f64,
    pub n_failures: usize,
}

impl ReportRow {
    /// A row is invalid when more than 10% of its replications failed.
    pub fn is_valid(&self, replications: usize) -> bool {
        10 * self.n_failures <= replications
    }
}

/// Report metadata (not part of the CSV contract).
#[derive(Debug, Clone)]
pub struct ReportMeta {
    pub master_seed: u64,
    pub replications: usize,
    pub config_fingerprint: u64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub meta: ReportMeta,
}

/// Runs the full experiment: replications in parallel, reduction in
/// replication order (byte-identical output for any thread count).
pub fn run_experiment(
    config: &ExperimentConfig,
    registry: &EstimatorRegistry,
) -> Result<ExperimentReport, SimError> {
    config.validate()?;
    let started = std::time::Instant::now();
    let mut outcomes = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| run_replication(config, registry, rep))
        .collect::<Result<Vec<_>, _>>()?;
    outcomes.sort_by_key(|o| o.rep);

    let gamma_true = config.distribution.gamma();
    let n_cells = outcomes[0].cells.len();
    let mut rows = Vec::with_capacity(n_cells);
    for cell_idx in 0..n_cells {
        let template = &outcomes[0].cells[cell_idx];
        let estimates: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| o.cells[cell_idx].outcome.as_ref().ok().copied())
            .collect();
        let n_failures = config.replications - estimates.len();
        let (bias, rmse, emp_variance) = if estimates.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let count = estimates.len() as f64;
            let mean = crate::numeric::kahan_sum(estimates.iter().copied()) / count;
            let mut sq_err = KahanSum::new();
            let mut sq_dev = KahanSum::new();
            for &e in &estimates {
                sq_err.add((e - gamma_true) * (e - gamma_true));
                sq_dev.add((e - mean) * (e - mean));
            }
            (mean - gamma_true, (sq_err.value() / count).sqrt(), sq_dev.value() / count)
        };
        rows.push(ReportRow {
            distribution: config.distribution.name().to_string(),
            m: template.m,
            k_n: template.k_n,
            tau: template.tau,
            estimator: template.estimator.clone(),
            bias,
            abs_bias: bias.abs(),
            rmse,
            emp_variance,
            n_failures,
        });
    }
    Ok(ExperimentReport {
        rows,
        meta: ReportMeta {
            master_seed: config.master_seed,
            replications: config.replications,
            config_fingerprint: config.fingerprint(),
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
    })
}

/// The estimate paths of a single replication.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub distribution: String,
    pub m: usize,
    pub k_n: usize,
    pub tau: f64,
    pub estimator: String,
    pub estimate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SingleSampleTrace {
    pub rep: u64,
    pub rows: Vec<TraceRow>,
}

/// Estimate paths over the `k_n` grid for one replication of the
/// experiment, for each machine count, tau and estimator.
pub fn single_sample_trace(
    config: &ExperimentConfig,
    registry: &EstimatorRegistry,
    rep: u64,
) -> Result<SingleSampleTrace, SimError> {
    config.validate()?;
    let outcome = run_replication(config, registry, rep)?;
    let rows = outcome
        .cells
        .into_iter()
        .map(|c| TraceRow {
            distribution: config.distribution.name().to_string(),
            m: c.m,
            k_n: c.k_n,
            tau: c.tau,
            estimator: c.estimator,
            estimate: c.outcome.ok(),
        })
        .collect();
    Ok(SingleSampleTrace { rep, rows })
}
