//! Command-line interface: configuration loading with flag > file > default
//! precedence, the five subcommands, and the exit-code contract
//! (0 success, 1 invalid configuration or malformed input, 2 I/O failure,
//! 3 failed check).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dgp::{generate_dataset, DgpConfig, MarketDataset};
use crate::error::{Error, Result};
use crate::estimation::{estimate_demand, estimate_supply, recover_theta, IVFit, ThetaEstimate};
use crate::identlab::{build_equivalent_pair, demonstrate_nonidentification, LinearCost};
use crate::model::{
    check_separability, default_separability_step, lau_exception_check, power_inverse_demand,
    StructuralParams,
};
use crate::montecarlo::{
    render_estimate_dump, render_table, run_grid_detailed, ExperimentGrid, TableFormat,
};

/// Environment variable bounding the Monte Carlo worker thread count.
pub const WORKERS_ENV: &str = "CONDUCTLAB_WORKERS";

/// On-disk mirror of the structural parameters and experiment grid, with the
/// standard calibration as defaults. Unknown fields are rejected so typos
/// fail loudly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub theta: f64,
    /// Error standard deviation for single-dataset commands.
    pub sigma: f64,
    pub shifter_low: f64,
    pub shifter_high: f64,
    pub instrument_noise_sd: f64,
    /// Sigma axis of the Monte Carlo grid.
    pub sigmas: Vec<f64>,
    /// Sample-size axis of the Monte Carlo grid.
    pub sample_sizes: Vec<usize>,
    pub n_reps: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha0: -1.0,
            alpha1: 1.0,
            alpha2: 1.0,
            beta0: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            theta: 0.5,
            sigma: 0.5,
            shifter_low: 1.0,
            shifter_high: 3.0,
            instrument_noise_sd: 1.0,
            sigmas: vec![0.001, 0.5, 1.0],
            sample_sizes: vec![50, 100, 200, 1000],
            n_reps: 1000,
            seed: 12345,
        }
    }
}

impl RunConfig {
    /// Reads a JSON config, or returns the defaults when no path is given.
    /// Parse failures cite the file, line, and column.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            Error::InvalidConfig(format!("{}: {e}", path.display()))
        })
    }

    pub fn params(&self) -> StructuralParams {
        StructuralParams {
            alpha0: self.alpha0,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            beta0: self.beta0,
            beta1: self.beta1,
            beta2: self.beta2,
            theta: self.theta,
            sigma: self.sigma,
        }
    }

    pub fn dgp_config(&self, sample_size: usize) -> DgpConfig {
        DgpConfig {
            params: self.params(),
            sample_size,
            seed: self.seed,
            shifter_low: self.shifter_low,
            shifter_high: self.shifter_high,
            instrument_noise_sd: self.instrument_noise_sd,
        }
    }

    pub fn grid(&self) -> ExperimentGrid {
        ExperimentGrid {
            params: self.params(),
            sigmas: self.sigmas.clone(),
            sample_sizes: self.sample_sizes.clone(),
            n_reps: self.n_reps,
            master_seed: self.seed,
        }
    }
}

/// Flags shared by every model-driven subcommand; each overrides the
/// matching config-file field.
#[derive(Args, Clone, Debug, Default)]
struct CommonFlags {
    /// JSON configuration file; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    shifter_low: Option<f64>,
    #[arg(long)]
    shifter_high: Option<f64>,
    #[arg(long)]
    instrument_noise_sd: Option<f64>,
    /// Master seed for data generation.
    #[arg(long)]
    seed: Option<u64>,
}

impl CommonFlags {
    fn apply(&self, config: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        set!(
            alpha0, alpha1, alpha2, beta0, beta1, beta2, theta, shifter_low, shifter_high,
            instrument_noise_sd, seed
        );
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Markdown,
}

impl From<OutputFormat> for TableFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => TableFormat::Csv,
            OutputFormat::Markdown => TableFormat::Markdown,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "conductlab",
    version,
    about = "Simulation and estimation laboratory for conduct-parameter \
             identification in log-linear demand/supply markets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic market dataset and emit it as CSV.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        common: CommonFlags,
        /// Error standard deviation (log scale).
        #[arg(long)]
        sigma: Option<f64>,
        /// Number of markets to simulate.
        #[arg(long, default_value_t = 100)]
        sample_size: usize,
        /// Output file; stdout when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Estimate demand and supply from a dataset CSV and recover conduct.
    Estimate {
        /// Dataset in the CSV schema written by `simulate`.
        dataset: PathBuf,
    },
    /// Run the Monte Carlo grid and render per-cell bias/RMSE tables.
    #[command(allow_negative_numbers = true)]
    Montecarlo {
        #[command(flatten)]
        common: CommonFlags,
        /// Comma-separated sigma axis, e.g. `--sigma 0.5,1.0`.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sigma: Option<Vec<f64>>,
        /// Comma-separated sample-size axis, e.g. `--sample-sizes 50,100`.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sample_sizes: Option<Vec<usize>>,
        /// Replications per cell.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Markdown)]
        format: OutputFormat,
        /// Output file; stdout when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Also write every per-replication estimate to this CSV.
        #[arg(long, value_name = "PATH")]
        dump: Option<PathBuf>,
    },
    /// Verify that the configured demand is separable and outside the
    /// exceptional family that would defeat conduct recovery.
    #[command(allow_negative_numbers = true)]
    Check {
        #[command(flatten)]
        common: CommonFlags,
        /// Error standard deviation (log scale); irrelevant to the verdicts
        /// but validated as part of the configuration.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Demonstrate that two conduct parameters can be observationally
    /// equivalent under additively separable linear demand.
    #[command(allow_negative_numbers = true)]
    Nonident {
        #[arg(long, default_value_t = 0.2)]
        theta_a: f64,
        #[arg(long, default_value_t = 0.5)]
        theta_b: f64,
        /// Demand slope magnitude a in P = r(x) - a*Q.
        #[arg(long, default_value_t = 1.0)]
        slope: f64,
        /// Base cost intercept.
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        /// Base cost quantity coefficient.
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
        /// Base cost shifter coefficient.
        #[arg(long, default_value_t = 0.5)]
        c2: f64,
        /// Number of sampled exogenous configurations.
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
    },
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    use std::io::Write;
    match out {
        Some(path) => fs::write(path, text).map_err(Error::from),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush().map_err(Error::from)
        }
    }
}

/// Runs `f` on a rayon pool sized by the `CONDUCTLAB_WORKERS` environment
/// variable, or on the default pool when it is unset.
fn with_worker_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(f()),
        Ok(raw) => {
            let workers: usize = raw.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!(
                    "{WORKERS_ENV} must be a positive integer, got `{raw}`"
                ))
            })?;
            if workers == 0 {
                return Err(Error::InvalidConfig(format!(
                    "{WORKERS_ENV} must be at least 1"
                )));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Numerical(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    demand: &'a IVFit,
    supply: &'a IVFit,
    theta: &'a ThetaEstimate,
}

fn cmd_simulate(
    common: &CommonFlags,
    sigma: Option<f64>,
    sample_size: usize,
    out: Option<&Path>,
) -> Result<i32> {
    let mut config = RunConfig::load(common.config.as_deref())?;
    common.apply(&mut config);
    if let Some(s) = sigma {
        config.sigma = s;
    }
    let dgp = config.dgp_config(sample_size);
    dgp.validate()?;
    let data = generate_dataset(&dgp)?;
    write_output(out, &data.to_csv())?;
    Ok(0)
}

fn cmd_estimate(dataset: &Path) -> Result<i32> {
    let text = fs::read_to_string(dataset)?;
    let data = MarketDataset::from_csv(&text)?;
    let demand = estimate_demand(&data)?;
    let (supply, gamma_hat) = estimate_supply(&data)?;
    let theta = recover_theta(gamma_hat, demand.coefficients[0]);
    let report = EstimateReport {
        demand: &demand,
        supply: &supply,
        theta: &theta,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serialization cannot fail");
    write_output(None, &format!("{text}\n"))?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_montecarlo(
    common: &CommonFlags,
    sigma: Option<Vec<f64>>,
    sample_sizes: Option<Vec<usize>>,
    reps: Option<usize>,
    format: OutputFormat,
    out: Option<&Path>,
    dump: Option<&Path>,
) -> Result<i32> {
    let mut config = RunConfig::load(common.config.as_deref())?;
    common.apply(&mut config);
    if let Some(s) = sigma {
        config.sigmas = s;
    }
    if let Some(t) = sample_sizes {
        config.sample_sizes = t;
    }
    if let Some(r) = reps {
        config.n_reps = r;
    }
    let grid = config.grid();
    grid.validate()?;
    let (summaries, cells) = with_worker_pool(|| run_grid_detailed(&grid))??;
    write_output(out, &render_table(&summaries, format.into())?)?;
    if let Some(dump_path) = dump {
        fs::write(dump_path, render_estimate_dump(&cells))?;
    }
    Ok(0)
}

fn cmd_check(common: &CommonFlags, sigma: Option<f64>) -> Result<i32> {
    let mut config = RunConfig::load(common.config.as_deref())?;
    common.apply(&mut config);
    if let Some(s) = sigma {
        config.sigma = s;
    }
    let params = config.params();
    params.validate()?;

    let demand = power_inverse_demand(params.alpha0, params.alpha1, params.alpha2);
    let (q, xd) = (2.0, [1.5, 2.5]);
    let verdict = check_separability(demand, q, xd, default_separability_step(q))?;
    let exceptional = lau_exception_check(params.alpha0, params.theta)?;

    let pass = verdict.separable && !exceptional;
    let text = format!(
        "separable: {} (ratio derivative {:.3e} at q = {q}, ratio {:.6})\n\
         exceptional separable form (alpha0 = -1/theta): {}\n\
         conduct recoverable from the supply intercept: {}\n",
        if verdict.separable { "yes" } else { "no" },
        verdict.q_derivative,
        verdict.ratio,
        if exceptional { "yes" } else { "no" },
        if pass { "yes" } else { "no" }
    );
    write_output(None, &text)?;
    Ok(if pass { 0 } else { 3 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_nonident(
    theta_a: f64,
    theta_b: f64,
    slope: f64,
    c0: f64,
    c1: f64,
    c2: f64,
    points: usize,
    seed: u64,
) -> Result<i32> {
    let pair = build_equivalent_pair(theta_a, theta_b, slope, LinearCost { c0, c1, c2 })?;
    let report = demonstrate_nonidentification(&pair, points, seed)?;
    let describe = |label: &str, m: &crate::identlab::ConductModel| {
        format!(
            "model {label}: theta = {}, cost = {} + {}*Q + {}*x1s\n",
            m.theta, m.cost.c0, m.cost.c1, m.cost.c2
        )
    };
    let mut text = format!(
        "demand: P = {} + {}*x1d - {}*Q\n",
        pair.demand.d0, pair.demand.d1, pair.demand.slope_a
    );
    text.push_str(&describe("A", &pair.model_a));
    text.push_str(&describe("B", &pair.model_b));
    text.push_str(&format!(
        "points: {}, max relative |dQ| = {:.3e}, max relative |dP| = {:.3e}\n",
        report.n_points, report.max_q_discrepancy, report.max_p_discrepancy
    ));
    text.push_str(&format!(
        "reduced forms identical: {}\n",
        if report.identical { "yes" } else { "no" }
    ));
    write_output(None, &text)?;
    Ok(if report.identical { 0 } else { 3 })
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate {
            common,
            sigma,
            sample_size,
            out,
        } => cmd_simulate(&common, sigma, sample_size, out.as_deref()),
        Command::Estimate { dataset } => cmd_estimate(&dataset),
        Command::Montecarlo {
            common,
            sigma,
            sample_sizes,
            reps,
            format,
            out,
            dump,
        } => cmd_montecarlo(
            &common,
            sigma,
            sample_sizes,
            reps,
            format,
            out.as_deref(),
            dump.as_deref(),
        ),
        Command::Check { common, sigma } => cmd_check(&common, sigma),
        Command::Nonident {
            theta_a,
            theta_b,
            slope,
            c0,
            c1,
            c2,
            points,
            seed,
        } => cmd_nonident(theta_a, theta_b, slope, c0, c1, c2, points, seed),
    }
}

/// Entry point used by the binary; maps errors onto the exit-code contract.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Io(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
