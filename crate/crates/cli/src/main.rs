//! `disthill` — distributed tail-index estimation from the command line.
//!
//! Subcommands cover the full pipeline: Monte Carlo experiments
//! (`simulate`, `trace`), estimation from shard files (`estimate`), the
//! closed-form oracle tables (`theory`), and the coordinator/worker
//! execution mode (`serve-worker`, `coordinate`).
//!
//! Exit codes: 0 success, 2 configuration error, 3 degenerate estimation
//! (strict policy), 4 I/O or protocol failure.

use std::fs;
use std::io::Write as _;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use disthill::central::{EstimateReport, EstimatorConfig, Weighting};
use disthill::distributions::Shard;
use disthill::error::{CentralError, SimError, TransportError, WorkerError};
use disthill::estimator::EstimatorRegistry;
use disthill::numeric::{fmt17, parse17};
use disthill::report::{write_report_csv, write_trace_csv};
use disthill::sim::{run_experiment, single_sample_trace, ExperimentConfig};
use disthill::theory;
use disthill::transport::session::{
    connect_workers, coordinate, serve_worker_tcp, SessionConfig,
};
use disthill::worker::{make_summary, RhoPolicy, TransmissionMode};

#[derive(Parser)]
#[command(name = "disthill", version, about = "Distributed tail-index estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write the report CSV.
    Simulate {
        /// Experiment config file (flat key = value format).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for report.csv and run_meta.txt.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores). The report is identical
        /// for any thread count.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write the estimate paths of a single replication as CSV.
    Trace {
        #[arg(long)]
        config: PathBuf,
        /// Replication index to trace.
        #[arg(long)]
        rep: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate from shard files (one decimal float per line, one file per
    /// machine).
    Estimate(EstimateArgs),
    /// Closed-form oracle tables as CSV.
    Theory {
        #[command(subcommand)]
        table: TheoryTable,
    },
    /// Serve one shard to a coordinator over TCP.
    ServeWorker {
        /// Shard file (one decimal float per line).
        #[arg(long)]
        shard: PathBuf,
        /// Listen address, e.g. 127.0.0.1:0 (the bound address is printed).
        #[arg(long)]
        listen: String,
    },
    /// Run one estimate over live workers.
    Coordinate(CoordinateArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Shard files, one per machine (machine ids follow argument order).
    #[arg(long, num_args = 1.., required = true)]
    shards: Vec<PathBuf>,
    #[arg(long)]
    kn: usize,
    #[arg(long)]
    krho: usize,
    #[arg(long)]
    tau: f64,
    /// Transmission budget: five | six | three | one.
    #[arg(long)]
    mode: String,
    /// Tail probability for the high-quantile estimate (six-stat only).
    #[arg(long)]
    pn: Option<f64>,
    /// equal | size
    #[arg(long, default_value = "equal")]
    weighting: String,
    /// strict | fallback
    #[arg(long, default_value = "strict")]
    policy: String,
}

#[derive(Args)]
struct CoordinateArgs {
    /// Worker endpoints (host:port), comma separated or repeated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    workers: Vec<String>,
    #[arg(long)]
    kn: usize,
    #[arg(long)]
    krho: usize,
    #[arg(long)]
    tau: f64,
    /// Transmission budget: five | six | three | one.
    #[arg(long)]
    mode: String,
    #[arg(long)]
    pn: Option<f64>,
    /// Drop failed workers instead of failing the session.
    #[arg(long)]
    allow_partial: bool,
    /// Write every wire line (both directions, in order) to this file.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long, default_value = "equal")]
    weighting: String,
    #[arg(long, default_value = "strict")]
    policy: String,
}

#[derive(Subcommand)]
enum TheoryTable {
    /// The finite-sample factor g(k, n, rho) and its expansion.
    G {
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        k: Vec<u64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        n: Vec<u64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true, allow_hyphen_values = true)]
        rho: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Asymptotic variance factor of the bias-corrected estimator.
    Variance {
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        gamma: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true, allow_hyphen_values = true)]
        rho: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate-optimal exceedance count per machine count.
    OptimalK {
        #[arg(long)]
        n_total: u64,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        m: Vec<u64>,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long, default_value_t = f64::NEG_INFINITY, allow_hyphen_values = true)]
        rho_tilde: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn degenerate(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

fn worker_failure(e: &WorkerError) -> Failure {
    match e {
        WorkerError::DegenerateT | WorkerError::RhoDegenerate { .. } => {
            Failure::degenerate(e.to_string())
        }
        _ => Failure::config(e.to_string()),
    }
}

impl From<WorkerError> for Failure {
    fn from(e: WorkerError) -> Self {
        worker_failure(&e)
    }
}

impl From<CentralError> for Failure {
    fn from(e: CentralError) -> Self {
        match &e {
            CentralError::Worker(w) => worker_failure(w),
            _ => Failure::config(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match &e {
            SimError::Io { .. } | SimError::MalformedCsv { .. } => Failure::io(e.to_string()),
            _ => Failure::config(e.to_string()),
        }
    }
}

impl From<TransportError> for Failure {
    fn from(e: TransportError) -> Self {
        match &e {
            TransportError::WorkerReported { kind, .. } if kind == "degenerate" => {
                Failure::degenerate(e.to_string())
            }
            TransportError::WorkerReported { kind, .. } if kind == "bounds" || kind == "domain" => {
                Failure::config(e.to_string())
            }
            TransportError::Central(c) => Failure::from(c.clone()),
            TransportError::Worker(w) => worker_failure(w),
            TransportError::NothingToAggregate => Failure::degenerate(e.to_string()),
            _ => Failure::io(e.to_string()),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(f) => {
            eprintln!("disthill: {}", f.message);
            std::process::exit(f.code);
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, out, threads } => cmd_simulate(&config, &out, threads),
        Command::Trace { config, rep, out } => cmd_trace(&config, rep, &out),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Theory { table } => cmd_theory(table),
        Command::ServeWorker { shard, listen } => cmd_serve_worker(&shard, &listen),
        Command::Coordinate(args) => cmd_coordinate(args),
    }
}

fn read_to_string(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn load_experiment(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = read_to_string(path)?;
    let config = ExperimentConfig::from_key_values(&text)?;
    for warning in config.validate().map_err(SimError::from)? {
        eprintln!("warning: {warning}");
    }
    Ok(config)
}

fn cmd_simulate(config_path: &Path, out: &Path, threads: Option<usize>) -> Result<(), Failure> {
    let config = load_experiment(config_path)?;
    if let Some(t) = threads {
        rayon_pool(t)?;
    }
    let registry = EstimatorRegistry::builtin();
    let report = run_experiment(&config, &registry)?;
    fs::create_dir_all(out).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    let csv_path = out.join("report.csv");
    write_report_csv(&report, &csv_path)?;
    let meta_path = out.join("run_meta.txt");
    let meta = format!(
        "master_seed={}\nreplications={}\nconfig_fingerprint={:016x}\nwall_time_secs={}\n",
        report.meta.master_seed,
        report.meta.replications,
        report.meta.config_fingerprint,
        report.meta.wall_time_secs,
    );
    fs::write(&meta_path, meta).map_err(|e| Failure::io(format!("{}: {e}", meta_path.display())))?;
    println!("wrote {} ({} rows)", csv_path.display(), report.rows.len());
    Ok(())
}

fn rayon_pool(threads: usize) -> Result<(), Failure> {
    rayon_global(threads).map_err(|e| Failure::config(format!("thread pool: {e}")))
}

fn rayon_global(threads: usize) -> Result<(), Box<dyn std::error::Error>> {
    // run_experiment uses the global pool; configure it once up front
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?)
}

fn cmd_trace(config_path: &Path, rep: u64, out: &Path) -> Result<(), Failure> {
    let config = load_experiment(config_path)?;
    let registry = EstimatorRegistry::builtin();
    let trace = single_sample_trace(&config, &registry, rep)?;
    write_trace_csv(&trace, out)?;
    println!("wrote {} ({} rows)", out.display(), trace.rows.len());
    Ok(())
}

/// Shard files: plain text, one decimal float per line, UTF-8, LF newlines.
fn read_shard(path: &Path, machine_id: usize) -> Result<Shard, Failure> {
    let text = read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = parse17(line).map_err(|_| {
            Failure::io(format!("{}: line {} is not a float: `{line}`", path.display(), i + 1))
        })?;
        values.push(v);
    }
    Shard::new(machine_id, values)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn parse_mode(token: &str) -> Result<TransmissionMode, Failure> {
    TransmissionMode::by_name(token)
        .ok_or_else(|| Failure::config(format!("unknown mode `{token}` (five|six|three|one)")))
}

fn parse_policy(token: &str) -> Result<RhoPolicy, Failure> {
    RhoPolicy::by_name(token)
        .ok_or_else(|| Failure::config(format!("unknown policy `{token}` (strict|fallback)")))
}

fn parse_weighting(token: &str) -> Result<Weighting, Failure> {
    Weighting::by_name(token)
        .ok_or_else(|| Failure::config(format!("unknown weighting `{token}` (equal|size)")))
}

fn print_report(report: &EstimateReport) {
    println!("variant={}", report.variant.name());
    if let Some(dh) = report.gamma_dh {
        println!("gamma_dh={}", fmt17(dh));
    }
    if let Some(rho) = report.rho_hat {
        println!("rho_hat={}", fmt17(rho));
    }
    println!("gamma_unbiased={}", fmt17(report.gamma_unbiased));
    if let Some(q) = report.quantile {
        println!("quantile={}", fmt17(q));
    }
    for d in &report.diagnostics {
        println!("diagnostic={d}");
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), Failure> {
    let mode = parse_mode(&args.mode)?;
    let policy = parse_policy(&args.policy)?;
    let weighting = parse_weighting(&args.weighting)?;
    let config = EstimatorConfig::new(args.kn, args.krho, args.tau, mode, policy, weighting)?;
    for warning in config.warnings() {
        eprintln!("warning: {warning}");
    }
    let summaries = args
        .shards
        .iter()
        .enumerate()
        .map(|(idx, path)| {
            let shard = read_shard(path, idx + 1)?;
            Ok(make_summary(&shard, args.kn, args.krho, args.tau, mode, policy)?)
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let report = disthill::central::estimate(&summaries, &config, args.pn)?;
    print_report(&report);
    Ok(())
}

fn table_out(out: Option<PathBuf>, content: String) -> Result<(), Failure> {
    match out {
        Some(path) => {
            fs::write(&path, content).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_theory(table: TheoryTable) -> Result<(), Failure> {
    let theory_err = |e: disthill::error::TheoryError| Failure::config(e.to_string());
    match table {
        TheoryTable::G { k, n, rho, out } => {
            let mut csv = String::from("k,n,rho,g_exact,g_expansion\n");
            for &nn in &n {
                for &kk in &k {
                    for &r in &rho {
                        let exact = theory::g_exact(kk, nn, r).map_err(theory_err)?;
                        let expansion = theory::g_expansion(kk, nn, r).map_err(theory_err)?;
                        csv.push_str(&format!(
                            "{kk},{nn},{},{},{}\n",
                            fmt17(r),
                            fmt17(exact),
                            fmt17(expansion)
                        ));
                    }
                }
            }
            table_out(out, csv)
        }
        TheoryTable::Variance { gamma, rho, out } => {
            let mut csv = String::from("gamma,rho,variance\n");
            for &g in &gamma {
                for &r in &rho {
                    let v = theory::unbiased_asymptotic_variance(g, r).map_err(theory_err)?;
                    csv.push_str(&format!("{},{},{}\n", fmt17(g), fmt17(r), fmt17(v)));
                }
            }
            table_out(out, csv)
        }
        TheoryTable::OptimalK { n_total, m, rho, rho_tilde, out } => {
            // default rho_tilde = rho (second and third order decay equal)
            let rho_tilde = if rho_tilde == f64::NEG_INFINITY { rho } else { rho_tilde };
            let mut csv = String::from("n_total,m,rho,rho_tilde,kn_dc\n");
            for &mm in &m {
                let k = theory::optimal_kn_dc(n_total, mm, rho, rho_tilde).map_err(theory_err)?;
                csv.push_str(&format!("{n_total},{mm},{},{},{k}\n", fmt17(rho), fmt17(rho_tilde)));
            }
            table_out(out, csv)
        }
    }
}

fn cmd_serve_worker(shard_path: &Path, listen: &str) -> Result<(), Failure> {
    let shard = read_shard(shard_path, 1)?;
    let listener =
        TcpListener::bind(listen).map_err(|e| Failure::io(format!("bind {listen}: {e}")))?;
    let addr = listener.local_addr().map_err(|e| Failure::io(e.to_string()))?;
    // announce the bound address (the coordinator needs it when port 0 was
    // requested)
    println!("LISTENING {addr}");
    std::io::stdout().flush().ok();
    serve_worker_tcp(&shard, listener)?;
    Ok(())
}

fn cmd_coordinate(args: CoordinateArgs) -> Result<(), Failure> {
    let mode = parse_mode(&args.mode)?;
    let policy = parse_policy(&args.policy)?;
    let weighting = parse_weighting(&args.weighting)?;
    let config = EstimatorConfig::new(args.kn, args.krho, args.tau, mode, policy, weighting)?;
    for warning in config.warnings() {
        eprintln!("warning: {warning}");
    }
    let session = SessionConfig { config, p_n: args.pn, allow_partial: args.allow_partial };
    let mut workers = connect_workers(&args.workers)?;
    let mut transcript_lines = Vec::new();
    let transcript = args.transcript.as_ref().map(|_| &mut transcript_lines);
    let report = coordinate(&mut workers, &session, transcript)?;
    if let Some(path) = &args.transcript {
        let mut text: String = transcript_lines.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    }
    print_report(&report);
    Ok(())
}
