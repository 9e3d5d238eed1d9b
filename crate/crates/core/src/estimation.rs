//! OLS/2SLS linear-algebra core, the demand and supply equation estimators,
//! and conduct-parameter recovery.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dgp::MarketDataset;
use crate::error::{Error, Result};

/// Relative tolerance for the rank-revealing factorization checks.
pub const RANK_TOL: f64 = 1e-10;

/// A demand estimate with `|alpha0_hat|` below this cannot be inverted into
/// a conduct parameter.
pub const THETA_ALPHA0_MIN: f64 = 1e-8;

/// Result of one two-stage least-squares fit.
///
/// `residuals` are structural (`y - X b`), not second-stage residuals; they
/// are excluded from the JSON report.
#[derive(Clone, Debug, Serialize)]
pub struct IVFit {
    pub regressor_names: Vec<String>,
    pub instrument_names: Vec<String>,
    pub coefficients: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    /// Centered first-stage R-squared per regressor, in regressor order.
    /// Exogenous regressors included among the instruments score 1.
    pub first_stage_r2: Vec<f64>,
    pub n_obs: usize,
}

/// Recovered conduct parameter.
///
/// Invalid recoveries keep their inputs and carry a NaN `theta_hat` with
/// `valid = false`; they are recorded rather than silently dropped.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ThetaEstimate {
    pub gamma_hat: f64,
    pub alpha0_hat: f64,
    pub theta_hat: f64,
    pub valid: bool,
}

fn rank_deficient_columns(r: &DMatrix<f64>) -> bool {
    let diag: Vec<f64> = (0..r.ncols().min(r.nrows()))
        .map(|i| r[(i, i)].abs())
        .collect();
    let max = diag.iter().cloned().fold(0.0_f64, f64::max);
    diag.iter().any(|d| *d <= RANK_TOL * max) || max == 0.0
}

/// Two-stage least squares via two QR factorizations (no explicit inverse).
///
/// Regressors are projected onto the instrument span, then the outcome is
/// regressed on the projections. Requires `m >= k` instruments, `T > m`
/// observations, and full-column-rank instruments (checked by a
/// column-pivoted QR with tolerance `RANK_TOL` times the largest pivot).
pub fn fit_2sls(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    regressor_names: &[&str],
    instrument_names: &[&str],
) -> Result<IVFit> {
    let t = y.nrows();
    let k = x.ncols();
    let m = z.ncols();
    if x.nrows() != t || z.nrows() != t {
        return Err(Error::Dimension(format!(
            "row counts disagree: y has {t}, regressors {}, instruments {}",
            x.nrows(),
            z.nrows()
        )));
    }
    if regressor_names.len() != k || instrument_names.len() != m {
        return Err(Error::Dimension(format!(
            "name counts disagree with column counts ({} vs {k}, {} vs {m})",
            regressor_names.len(),
            instrument_names.len()
        )));
    }
    if k == 0 || m == 0 {
        return Err(Error::EmptyInput(
            "regressor and instrument matrices must be non-empty".to_string(),
        ));
    }
    if m < k {
        return Err(Error::RankDeficient(format!(
            "under-identified system: {m} instruments for {k} regressors"
        )));
    }
    if t <= m {
        return Err(Error::InsufficientData {
            needed: m + 1,
            got: t,
        });
    }

    let pivoted = z.clone().col_piv_qr();
    if rank_deficient_columns(&pivoted.r()) {
        return Err(Error::RankDeficient(format!(
            "instrument matrix [{}] does not have full column rank",
            instrument_names.join(", ")
        )));
    }

    // Stage 1: X_hat = Q_z Q_z' X is the projection of X on the instrument span.
    let qr_z = z.clone().qr();
    let qz = qr_z.q();
    let x_hat = &qz * (qz.transpose() * x);

    // Stage 2: least squares of y on X_hat through a second QR.
    let qr_x = x_hat.clone().qr();
    let r = qr_x.r();
    if rank_deficient_columns(&r) {
        return Err(Error::RankDeficient(format!(
            "projected regressor matrix [{}] does not have full column rank",
            regressor_names.join(", ")
        )));
    }
    let rhs = qr_x.q().transpose() * y;
    let coeffs = r.solve_upper_triangular(&rhs).ok_or_else(|| {
        Error::RankDeficient("second-stage triangular solve failed".to_string())
    })?;

    let residuals = y - x * &coeffs;
    let first_stage_r2 = (0..k)
        .map(|j| {
            let col = x.column(j);
            let fitted = x_hat.column(j);
            let mean = col.sum() / t as f64;
            let sst: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            if sst == 0.0 {
                return 1.0;
            }
            let ssr: f64 = col
                .iter()
                .zip(fitted.iter())
                .map(|(v, f)| (v - f).powi(2))
                .sum();
            1.0 - ssr / sst
        })
        .collect();

    Ok(IVFit {
        regressor_names: regressor_names.iter().map(|s| s.to_string()).collect(),
        instrument_names: instrument_names.iter().map(|s| s.to_string()).collect(),
        coefficients: coeffs.iter().cloned().collect(),
        residuals: residuals.iter().cloned().collect(),
        first_stage_r2,
        n_obs: t,
    })
}

fn column_matrix(t: usize, cols: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(t, cols.len(), |i, j| cols[j][i])
}

fn ones(t: usize) -> Vec<f64> {
    vec![1.0; t]
}

/// Fits the demand equation `log_p = alpha0*log_q + alpha1*log_x1d
/// + alpha2*log_x2d + eps_d` (no intercept) by 2SLS.
///
/// Instruments are the noisy cost-shifter instruments plus the included
/// exogenous shifters, plus a constant. The equation itself has no
/// intercept, but the constant belongs in the first stage: without it the
/// quantity projection is forced through the origin and the instruments'
/// noisy levels, rather than their variation, drive the slope.
///
/// Coefficient order: `(alpha0_hat, alpha1_hat, alpha2_hat)`.
pub fn estimate_demand(data: &MarketDataset) -> Result<IVFit> {
    data.validate()?;
    let t = data.len();
    if t < 6 {
        return Err(Error::InsufficientData { needed: 6, got: t });
    }
    let y = DVector::from_column_slice(&data.log_p);
    let x = column_matrix(t, &[&data.log_q, &data.log_x1d, &data.log_x2d]);
    let one = ones(t);
    let z = column_matrix(t, &[&one, &data.z1s, &data.z2s, &data.log_x1d, &data.log_x2d]);
    fit_2sls(
        &y,
        &x,
        &z,
        &["log_q", "log_x1d", "log_x2d"],
        &["const", "z1s", "z2s", "log_x1d", "log_x2d"],
    )
}

/// Fits the supply relation
/// `log_p = gamma + beta0*log_q + beta1*log_x1s + beta2*log_x2s + eps_s`
/// by 2SLS, instrumenting `log_q` with the demand shifters.
///
/// Coefficient order: `(gamma_hat, beta0_hat, beta1_hat, beta2_hat)`; the
/// intercept is also returned separately.
pub fn estimate_supply(data: &MarketDataset) -> Result<(IVFit, f64)> {
    data.validate()?;
    let t = data.len();
    if t < 6 {
        return Err(Error::InsufficientData { needed: 6, got: t });
    }
    let y = DVector::from_column_slice(&data.log_p);
    let one = ones(t);
    let x = column_matrix(t, &[&one, &data.log_q, &data.log_x1s, &data.log_x2s]);
    let z = column_matrix(
        t,
        &[&one, &data.log_x1d, &data.log_x2d, &data.log_x1s, &data.log_x2s],
    );
    let fit = fit_2sls(
        &y,
        &x,
        &z,
        &["const", "log_q", "log_x1s", "log_x2s"],
        &["const", "log_x1d", "log_x2d", "log_x1s", "log_x2s"],
    )?;
    let gamma_hat = fit.coefficients[0];
    Ok((fit, gamma_hat))
}

/// Inverts the supply intercept into the conduct parameter:
/// `theta_hat = (exp(-gamma_hat) - 1) / alpha0_hat`.
pub fn recover_theta(gamma_hat: f64, alpha0_hat: f64) -> ThetaEstimate {
    let invertible =
        gamma_hat.is_finite() && alpha0_hat.is_finite() && alpha0_hat.abs() >= THETA_ALPHA0_MIN;
    let theta_hat = if invertible {
        (-gamma_hat).exp_m1() / alpha0_hat
    } else {
        f64::NAN
    };
    ThetaEstimate {
        gamma_hat,
        alpha0_hat,
        theta_hat,
        valid: invertible && theta_hat.is_finite(),
    }
}
