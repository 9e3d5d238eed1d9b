//! Replication harness: runs the (sigma, T) experiment grid, aggregates
//! per-parameter bias and RMSE, and renders result tables.

use rayon::prelude::*;
use serde::Serialize;

use crate::dgp::{generate_dataset, DgpConfig};
use crate::error::{Error, Result};
use crate::estimation::{estimate_demand, estimate_supply, recover_theta};
use crate::model::StructuralParams;

/// Number of tracked structural parameters.
pub const PARAM_COUNT: usize = 7;

/// Tracked parameters, in fixed order, as used in machine-readable output.
pub const PARAM_NAMES: [&str; PARAM_COUNT] =
    ["alpha0", "alpha1", "alpha2", "beta0", "beta1", "beta2", "theta"];

/// Display labels for the same parameters, used in Markdown tables.
pub const PARAM_LABELS: [&str; PARAM_COUNT] = ["α₀", "α₁", "α₂", "β₀", "β₁", "β₂", "θ"];

/// The full experiment: one Monte Carlo cell per (sigma, sample size) pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentGrid {
    /// Structural parameters; the `sigma` field is overridden cell by cell.
    pub params: StructuralParams,
    pub sigmas: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub n_reps: usize,
    pub master_seed: u64,
}

impl ExperimentGrid {
    /// Standard grid: sigmas {0.001, 0.5, 1.0}, sample sizes
    /// {50, 100, 200, 1000}, 1000 replications.
    pub fn standard(params: StructuralParams, master_seed: u64) -> Self {
        Self {
            params,
            sigmas: vec![0.001, 0.5, 1.0],
            sample_sizes: vec![50, 100, 200, 1000],
            n_reps: 1000,
            master_seed,
        }
    }

    /// Requires valid parameters, at least one replication, strictly
    /// increasing positive sample sizes, and strictly increasing
    /// non-negative sigmas (so the output ordering is well defined).
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_reps == 0 {
            return Err(Error::InvalidConfig("n_reps must be at least 1".to_string()));
        }
        if self.sigmas.is_empty() || self.sample_sizes.is_empty() {
            return Err(Error::InvalidConfig(
                "sigmas and sample_sizes must be non-empty".to_string(),
            ));
        }
        for w in self.sample_sizes.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidConfig(format!(
                    "sample_sizes must be strictly increasing, got {:?}",
                    self.sample_sizes
                )));
            }
        }
        if self.sample_sizes[0] == 0 {
            return Err(Error::InvalidConfig(
                "sample sizes must be positive".to_string(),
            ));
        }
        for s in &self.sigmas {
            if !s.is_finite() || *s < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "sigmas must be finite and non-negative, got {s}"
                )));
            }
        }
        for w in self.sigmas.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidConfig(format!(
                    "sigmas must be strictly increasing, got {:?}",
                    self.sigmas
                )));
            }
        }
        Ok(())
    }

    /// True parameter vector in [`PARAM_NAMES`] order.
    pub fn truth(&self) -> [f64; PARAM_COUNT] {
        let p = self.params;
        [p.alpha0, p.alpha1, p.alpha2, p.beta0, p.beta1, p.beta2, p.theta]
    }
}

/// Bias and RMSE per parameter for one (sigma, T) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McSummary {
    pub sigma: f64,
    pub sample_size: usize,
    /// Mean of (estimate - truth) over valid replications, [`PARAM_NAMES`] order.
    pub bias: [f64; PARAM_COUNT],
    /// Root mean squared (estimate - truth), same order.
    pub rmse: [f64; PARAM_COUNT],
    pub n_valid: usize,
    pub n_invalid: usize,
}

/// Per-replication estimates for one cell, in replication order; `None`
/// marks a replication whose fit failed or whose theta was unrecoverable.
#[derive(Clone, Debug, PartialEq)]
pub struct CellEstimates {
    pub sigma: f64,
    pub sample_size: usize,
    pub estimates: Vec<Option<[f64; PARAM_COUNT]>>,
}

/// Output format for [`render_table`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pure hash of (master seed, sigma index, size index, replication), so any
/// cell or replication can run in isolation or in parallel and still see the
/// stream it would see in a sequential sweep.
pub fn replication_seed(master_seed: u64, sigma_index: usize, size_index: usize, rep: usize) -> u64 {
    let mut h = splitmix64(master_seed);
    h = splitmix64(h ^ sigma_index as u64);
    h = splitmix64(h ^ size_index as u64);
    h = splitmix64(h ^ rep as u64);
    h
}

/// One replication: simulate, fit both equations, recover theta. `None` when
/// any stage fails; failures are tallied, never silently dropped.
fn run_rep(params: &StructuralParams, sample_size: usize, seed: u64) -> Option<[f64; PARAM_COUNT]> {
    let config = DgpConfig::new(*params, sample_size, seed);
    let data = generate_dataset(&config).ok()?;
    let demand = estimate_demand(&data).ok()?;
    let (supply, gamma_hat) = estimate_supply(&data).ok()?;
    let theta = recover_theta(gamma_hat, demand.coefficients[0]);
    if !theta.valid {
        return None;
    }
    let est = [
        demand.coefficients[0],
        demand.coefficients[1],
        demand.coefficients[2],
        supply.coefficients[1],
        supply.coefficients[2],
        supply.coefficients[3],
        theta.theta_hat,
    ];
    est.iter().all(|v| v.is_finite()).then_some(est)
}

/// Runs every replication of one cell, in parallel, in replication order.
pub fn run_cell_estimates(
    grid: &ExperimentGrid,
    sigma_index: usize,
    size_index: usize,
) -> Result<CellEstimates> {
    grid.validate()?;
    let sigma = *grid.sigmas.get(sigma_index).ok_or_else(|| {
        Error::InvalidConfig(format!("sigma index {sigma_index} out of range"))
    })?;
    let sample_size = *grid.sample_sizes.get(size_index).ok_or_else(|| {
        Error::InvalidConfig(format!("size index {size_index} out of range"))
    })?;
    let cell_params = StructuralParams {
        sigma,
        ..grid.params
    };
    cell_params.validate()?;
    let estimates: Vec<Option<[f64; PARAM_COUNT]>> = (0..grid.n_reps)
        .into_par_iter()
        .map(|rep| {
            run_rep(
                &cell_params,
                sample_size,
                replication_seed(grid.master_seed, sigma_index, size_index, rep),
            )
        })
        .collect();
    Ok(CellEstimates {
        sigma,
        sample_size,
        estimates,
    })
}

/// Folds per-replication estimates into bias and RMSE per parameter.
///
/// The reduction accumulates deviation sums sequentially in replication
/// order, so the result does not depend on how the estimates were produced.
pub fn aggregate_cell(
    sigma: f64,
    sample_size: usize,
    truth: &[f64; PARAM_COUNT],
    estimates: &[Option<[f64; PARAM_COUNT]>],
) -> Result<McSummary> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput("no replications to aggregate".to_string()));
    }
    let mut sum_dev = [0.0_f64; PARAM_COUNT];
    let mut sum_dev2 = [0.0_f64; PARAM_COUNT];
    let mut n_valid = 0usize;
    for est in estimates.iter().flatten() {
        n_valid += 1;
        for j in 0..PARAM_COUNT {
            let dev = est[j] - truth[j];
            sum_dev[j] += dev;
            sum_dev2[j] += dev * dev;
        }
    }
    if n_valid == 0 {
        return Err(Error::Numerical(format!(
            "all {} replications of cell (sigma = {sigma}, T = {sample_size}) failed",
            estimates.len()
        )));
    }
    let mut bias = [0.0_f64; PARAM_COUNT];
    let mut rmse = [0.0_f64; PARAM_COUNT];
    for j in 0..PARAM_COUNT {
        bias[j] = sum_dev[j] / n_valid as f64;
        rmse[j] = (sum_dev2[j] / n_valid as f64).sqrt();
    }
    Ok(McSummary {
        sigma,
        sample_size,
        bias,
        rmse,
        n_valid,
        n_invalid: estimates.len() - n_valid,
    })
}

/// Runs one (sigma, T) cell and aggregates it.
pub fn run_cell(grid: &ExperimentGrid, sigma_index: usize, size_index: usize) -> Result<McSummary> {
    let cell = run_cell_estimates(grid, sigma_index, size_index)?;
    aggregate_cell(cell.sigma, cell.sample_size, &grid.truth(), &cell.estimates)
}

/// Runs the whole grid and keeps the per-replication estimates.
///
/// Summaries are ordered by (sigma ascending, T ascending) and are
/// bit-identical regardless of how many worker threads execute the cells.
pub fn run_grid_detailed(grid: &ExperimentGrid) -> Result<(Vec<McSummary>, Vec<CellEstimates>)> {
    grid.validate()?;
    let truth = grid.truth();
    let mut summaries = Vec::with_capacity(grid.sigmas.len() * grid.sample_sizes.len());
    let mut cells = Vec::with_capacity(summaries.capacity());
    for sigma_index in 0..grid.sigmas.len() {
        for size_index in 0..grid.sample_sizes.len() {
            let cell = run_cell_estimates(grid, sigma_index, size_index)?;
            summaries.push(aggregate_cell(
                cell.sigma,
                cell.sample_size,
                &truth,
                &cell.estimates,
            )?);
            cells.push(cell);
        }
    }
    Ok((summaries, cells))
}

/// Runs the whole grid; see [`run_grid_detailed`].
pub fn run_grid(grid: &ExperimentGrid) -> Result<Vec<McSummary>> {
    run_grid_detailed(grid).map(|(summaries, _)| summaries)
}

/// Renders summaries as a tidy CSV (`sigma,T,parameter,bias,rmse,n_valid`,
/// floats at 17 significant digits) or as one Markdown table per sigma with
/// paired bias/RMSE columns per sample size at 3 decimals.
///
/// All summaries must come from one parameter set; the caller guarantees it.
pub fn render_table(summaries: &[McSummary], format: TableFormat) -> Result<String> {
    if summaries.is_empty() {
        return Err(Error::EmptyInput("no summaries to render".to_string()));
    }
    match format {
        TableFormat::Csv => {
            let mut out = String::from("sigma,T,parameter,bias,rmse,n_valid\n");
            for s in summaries {
                for (j, name) in PARAM_NAMES.iter().enumerate() {
                    out.push_str(&format!(
                        "{},{},{},{:.16e},{:.16e},{}\n",
                        s.sigma, s.sample_size, name, s.bias[j], s.rmse[j], s.n_valid
                    ));
                }
            }
            Ok(out)
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            let mut groups: Vec<(f64, Vec<&McSummary>)> = Vec::new();
            for s in summaries {
                match groups.last_mut() {
                    Some((sigma, group)) if *sigma == s.sigma => group.push(s),
                    _ => groups.push((s.sigma, vec![s])),
                }
            }
            for (sigma, group) in &groups {
                out.push_str(&format!("### σ = {sigma}\n\n"));
                let mut header = String::from("| parameter |");
                let mut rule = String::from("|---|");
                for s in group {
                    header.push_str(&format!(" T={} bias | T={} RMSE |", s.sample_size, s.sample_size));
                    rule.push_str("---:|---:|");
                }
                out.push_str(&header);
                out.push('\n');
                out.push_str(&rule);
                out.push('\n');
                for (j, label) in PARAM_LABELS.iter().enumerate() {
                    let mut row = format!("| {label} |");
                    for s in group {
                        row.push_str(&format!(" {:.3} | {:.3} |", s.bias[j], s.rmse[j]));
                    }
                    out.push_str(&row);
                    out.push('\n');
                }
                out.push('\n');
                let counts: Vec<String> = group
                    .iter()
                    .map(|s| {
                        format!(
                            "T={}: {}/{}",
                            s.sample_size,
                            s.n_valid,
                            s.n_valid + s.n_invalid
                        )
                    })
                    .collect();
                out.push_str(&format!("Valid replications: {}\n\n", counts.join("; ")));
            }
            Ok(out)
        }
    }
}

/// Per-replication dump in tidy form: `sigma,T,rep,parameter,estimate`.
/// Failed replications appear with an empty estimate field.
pub fn render_estimate_dump(cells: &[CellEstimates]) -> String {
    let mut out = String::from("sigma,T,rep,parameter,estimate\n");
    for cell in cells {
        for (rep, est) in cell.estimates.iter().enumerate() {
            for j in 0..PARAM_COUNT {
                match est {
                    Some(values) => out.push_str(&format!(
                        "{},{},{},{},{:.16e}\n",
                        cell.sigma, cell.sample_size, rep, PARAM_NAMES[j], values[j]
                    )),
                    None => out.push_str(&format!(
                        "{},{},{},{},\n",
                        cell.sigma, cell.sample_size, rep, PARAM_NAMES[j]
                    )),
                }
            }
        }
    }
    out
}
