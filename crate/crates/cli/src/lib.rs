//! Command-line front end for the `gpts` library: runs replica campaigns,
//! writes traces and summaries, runs the empirical verifiers and emits
//! plot data.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use gpts::bench::verify::{
    verify_chisq, verify_eigen, verify_gradient, verify_posterior, EigenReport, EIGEN_BURN_IN,
};
use gpts::bench::{run_campaign, CampaignResult, Objective};
use gpts::engine::TsConfig;
use gpts::exec::Parallelism;

pub use config::ExperimentConfig;

/// Failure classes and their process exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Exit 1: a verifier failed or the numerics broke down.
    Runtime(String),
    /// Exit 2: bad flags or config.
    Config(String),
    /// Exit 3: reading or writing files.
    Io(String),
    /// Exit 4: the objective oracle failed mid-run.
    Oracle(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Oracle(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Runtime(m) => write!(f, "error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Oracle(m) => write!(f, "oracle error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gpts::Error> for CliError {
    fn from(e: gpts::Error) -> Self {
        match e {
            gpts::Error::InvalidArgument(m) => CliError::Config(m),
            e @ gpts::Error::Oracle { .. } => CliError::Oracle(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gpts", version, about = "Epsilon-greedy Thompson sampling with a GP prior")]
pub struct Cli {
    /// key=value config file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Base seed (ts.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (output.dir).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Number of replicas (campaign.replicas).
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// f1, f2 or f_beta (objective.name).
    #[arg(long, global = true)]
    pub objective: Option<String>,
    /// Height of f_beta (objective.beta).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Observation noise sd (objective.noise_sigma).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Uniform-exploration probability (ts.xi).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub xi: Option<f64>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub max_stages: Option<usize>,
    #[arg(long, global = true)]
    pub m_star: Option<usize>,
    #[arg(long, global = true)]
    pub stop_window: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub stop_tolerance: Option<f64>,
    /// Also write plot data after `run` (output.emit_plots).
    #[arg(long, global = true)]
    pub emit_plots: bool,
    /// Any other config key, e.g. `--set ts.anchors=128`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a replica campaign and write traces and a summary.
    Run,
    /// Run one of the empirical verifiers.
    Verify {
        suite: Suite,
        /// Monte Carlo draws (chisq, posterior).
        #[arg(long)]
        draws: Option<usize>,
        /// Random instances (gradient).
        #[arg(long)]
        instances: Option<usize>,
        /// Stages of the eigenvalue run (eigen).
        #[arg(long)]
        stages: Option<usize>,
    },
    /// Run a campaign per noise level in campaign.sigmas and write plot data.
    EmitPlots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Eigen,
    Chisq,
    Posterior,
    Gradient,
}

/// Loads the config file (if any) and applies flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    let overrides: [(&str, Option<String>); 12] = [
        ("ts.seed", cli.seed.map(|v| v.to_string())),
        ("output.dir", cli.out.as_ref().map(|p| p.display().to_string())),
        ("campaign.replicas", cli.replicas.map(|v| v.to_string())),
        ("objective.name", cli.objective.clone()),
        ("objective.beta", cli.beta.map(|v| v.to_string())),
        ("objective.noise_sigma", cli.sigma.map(|v| v.to_string())),
        ("ts.xi", cli.xi.map(|v| v.to_string())),
        ("ts.batch_size", cli.batch_size.map(|v| v.to_string())),
        ("ts.max_stages", cli.max_stages.map(|v| v.to_string())),
        ("ts.m_star", cli.m_star.map(|v| v.to_string())),
        ("ts.stop_window", cli.stop_window.map(|v| v.to_string())),
        ("ts.stop_tolerance", cli.stop_tolerance.map(|v| v.to_string())),
    ];
    for (k, v) in overrides {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    if let Some(p) = &cli.out {
        cfg.out_dir = p.clone();
    }
    if cli.emit_plots {
        cfg.emit_plots = true;
    }
    Ok(cfg)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Run => cmd_run(&cfg).map(|_| ()),
        Command::Verify { suite, draws, instances, stages } => {
            cmd_verify(&cfg, *suite, VerifyOptions { draws: *draws, instances: *instances, stages: *stages })
        }
        Command::EmitPlots => cmd_emit_plots(&cfg).map(|_| ()),
    }
}

fn campaign(
    cfg: &ExperimentConfig,
    obj: &Objective,
    record_surfaces: bool,
    par: Parallelism,
) -> Result<CampaignResult, CliError> {
    let ts = TsConfig { record_surfaces: record_surfaces && obj.dim() == 1, ..cfg.ts.clone() };
    Ok(run_campaign(&ts, obj, cfg.replicas, cfg.ts.seed, par)?)
}

/// Runs the campaign with the replica schedule taken from `GPTS_THREADS`.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<CampaignResult, CliError> {
    cmd_run_with(cfg, Parallelism::from_env())
}

/// Runs the campaign and writes `trace-NNN.csv`, optional plot data, and
/// `summary.txt` last.
pub fn cmd_run_with(cfg: &ExperimentConfig, par: Parallelism) -> Result<CampaignResult, CliError> {
    let obj = cfg.validate()?;
    let result = campaign(cfg, &obj, cfg.emit_plots, par)?;
    output::create_dir(&cfg.out_dir)?;
    for (i, r) in result.replicas.iter().enumerate() {
        let csv = output::trace_csv(r, &obj)?;
        output::write_atomic(&cfg.out_dir.join(output::trace_file_name(i)), csv.as_bytes())?;
    }
    if cfg.emit_plots {
        output::write_plot_files(&cfg.out_dir.join("plots"), "", &result)?;
    }
    let summary = output::summary_text(&cfg.render(), &obj, &result);
    output::write_atomic(&cfg.out_dir.join("summary.txt"), summary.as_bytes())?;
    for (i, r) in result.replicas.iter().enumerate() {
        println!(
            "replica {i:03}: x* = {:?} after {} stages{}",
            r.estimate,
            r.trace.stages.len(),
            if r.stopped { " (stopping rule)" } else { "" }
        );
    }
    if let Some(fit) = &result.decay {
        println!("median error decay slope {:.4} (r^2 {:.3})", fit.slope, fit.r_squared);
    }
    println!("wrote {}", cfg.out_dir.display());
    Ok(result)
}

/// Runs one campaign per noise level and writes `plots/*-sigma-<s>.dat`
/// plus a `plots/decay-slopes.dat` table.
pub fn cmd_emit_plots(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let dir = cfg.out_dir.join("plots");
    let mut written = Vec::new();
    let mut table = String::from("# sigma slope intercept r_squared median_stages_to_threshold\n");
    for &s in &cfg.sigmas {
        let obj = cfg.objective_with_noise(s)?;
        let result = campaign(cfg, &obj, true, Parallelism::from_env())?;
        written.extend(output::write_plot_files(&dir, &format!("-sigma-{s}"), &result)?);
        let (slope, icpt, r2) = result.decay.as_ref().map_or((f64::NAN, f64::NAN, f64::NAN), |d| (d.slope, d.intercept, d.r_squared));
        table.push_str(&format!("{s} {slope} {icpt} {r2} {}\n", result.median_stages_to_threshold()));
        println!("sigma {s}: median stages to threshold {}, slope {slope:.4}", result.median_stages_to_threshold());
    }
    let p = dir.join("decay-slopes.dat");
    output::write_atomic(&p, table.as_bytes())?;
    written.push(p);
    println!("wrote {}", dir.display());
    Ok(written)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub draws: Option<usize>,
    pub instances: Option<usize>,
    pub stages: Option<usize>,
}

/// Default stage count of `verify eigen`.
pub const EIGEN_STAGES: usize = 400;

/// Config used by `verify eigen`: the experiment's settings with the stopping
/// rule disabled and `stages` stages.
pub fn eigen_run_config(cfg: &ExperimentConfig, stages: usize) -> TsConfig {
    TsConfig { max_stages: stages, stop_window: stages + 1, ..cfg.ts.clone() }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn cmd_verify(cfg: &ExperimentConfig, suite: Suite, opts: VerifyOptions) -> Result<(), CliError> {
    let seed = cfg.ts.seed;
    let pass = match suite {
        Suite::Chisq => {
            let rep = verify_chisq(opts.draws.unwrap_or(1_000_000), seed)?;
            println!("{:>3} {:>5} {:>12} {:>12} {:>10} {:>10} {:>12}", "m", "delta", "bound", "mc", "se", "margin", "lm_bound");
            for r in &rep.rows {
                println!(
                    "{:>3} {:>5} {:>12.4e} {:>12.4e} {:>10.2e} {:>10.1} {:>12.4e}",
                    r.m, r.delta, r.bound, r.monte_carlo, r.std_error, r.margin_se, r.laurent_massart
                );
            }
            println!("margins in MC standard errors; pass needs every margin >= -3");
            rep.pass
        }
        Suite::Gradient => {
            let rep = verify_gradient(opts.instances.unwrap_or(20), seed)?;
            println!("instances {} max relative error {:.3e} (limit 1e-4)", rep.instances, rep.max_relative_error);
            rep.pass
        }
        Suite::Posterior => {
            let rep = verify_posterior(opts.draws.unwrap_or(100_000), seed)?;
            println!("mean vs normal equations: max relative error {:.3e} over {} instances", rep.max_mean_relative_error, rep.instances);
            println!("sampler: m_t {} draws {} KS {:.5} (1% critical {:.5})", rep.m_t, rep.draws, rep.ks_statistic, rep.ks_critical);
            println!("sampler: covariance Frobenius relative error {:.4} (limit 0.05)", rep.covariance_relative_error);
            rep.pass
        }
        Suite::Eigen => {
            let obj = cfg.validate()?;
            let stages = opts.stages.unwrap_or(EIGEN_STAGES);
            if stages == 0 {
                return Err(CliError::Config("--stages must be at least 1".into()));
            }
            let rep = verify_eigen(&eigen_run_config(cfg, stages), &obj, gpts::exec::derive_seed(seed, 1))?;
            print_eigen(&rep);
            rep.pass
        }
    };
    println!("{}", verdict(pass));
    if pass {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("verify {suite:?} failed").to_lowercase()))
    }
}

fn print_eigen(rep: &EigenReport) {
    println!("{:>6} {:>7} {:>14} {:>12} {:>12}", "stage", "t", "lambda_min/t", "lambda_max/t", "bound");
    let mut next = 100;
    for (i, r) in rep.rows.iter().enumerate() {
        let last = i + 1 == rep.rows.len();
        if r.n_obs >= next || last {
            println!(
                "{:>6} {:>7} {:>14.6e} {:>12.5} {:>12.5}",
                r.stage, r.n_obs, r.lambda_min_over_t, r.lambda_max_over_t, r.upper_bound
            );
            while next <= r.n_obs {
                next *= 2;
            }
        }
    }
    println!("min lambda_min/t for t >= {EIGEN_BURN_IN}: {:.6e} (ratio to its first value {:.3})", rep.min_lambda, rep.floor_ratio);
    println!("max lambda_max/t - bound: {:.5} (limit 0.1)", rep.max_excess);
}

/// Reads a `key=value` summary file into ordered pairs.
pub fn read_summary(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    config::parse_pairs(&text)
}
