//! Structural functional forms, the closed-form market equilibrium, and the
//! analytic checks on the demand function.
//!
//! The market is a homogeneous-goods industry with power inverse demand
//! `P = exp(eps_d) * Q^alpha0 * x1d^alpha1 * x2d^alpha2`, power marginal cost
//! `MC = exp(eps_s) * Q^beta0 * x1s^beta1 * x2s^beta2`, and the conduct
//! first-order condition `P + theta * (dP/dQ) * Q = MC`. For power demand the
//! condition collapses to `(1 + theta*alpha0) * P = MC`, so the supply
//! relation is log-linear with intercept `gamma = -log(1 + theta*alpha0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance below which `alpha0 - beta0` is treated as zero (singular system).
pub const SLOPE_GAP_TOL: f64 = 1e-12;

/// Relative tolerance for the separability verdict.
pub const SEPARABILITY_RTOL: f64 = 1e-6;

/// Absolute tolerance on `alpha0 + 1/theta` for the exceptional-form check.
pub const EXCEPTIONAL_FORM_TOL: f64 = 1e-12;

/// All structural constants of the demand/cost system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    /// Demand elasticity exponent on quantity.
    pub alpha0: f64,
    /// Demand shifter exponents.
    pub alpha1: f64,
    pub alpha2: f64,
    /// Cost elasticity exponent on quantity.
    pub beta0: f64,
    /// Cost shifter exponents.
    pub beta1: f64,
    pub beta2: f64,
    /// Conduct parameter in [0, 1]: 0 is price taking, 1 is joint monopoly.
    pub theta: f64,
    /// Standard deviation of both structural errors (log scale).
    pub sigma: f64,
}

impl StructuralParams {
    /// Validated constructor; see [`StructuralParams::validate`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha0: f64,
        alpha1: f64,
        alpha2: f64,
        beta0: f64,
        beta1: f64,
        beta2: f64,
        theta: f64,
        sigma: f64,
    ) -> Result<Self> {
        let p = Self {
            alpha0,
            alpha1,
            alpha2,
            beta0,
            beta1,
            beta2,
            theta,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    /// Baseline calibration used by the test suite and as CLI defaults:
    /// unit exponents, downward demand slope -1, conduct 0.5.
    pub fn baseline(sigma: f64) -> Self {
        Self {
            alpha0: -1.0,
            alpha1: 1.0,
            alpha2: 1.0,
            beta0: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            theta: 0.5,
            sigma,
        }
    }

    /// Checks every invariant the rest of the crate relies on:
    /// finite fields, `theta` in [0, 1], `1 + theta*alpha0 > 0`,
    /// `alpha0 != beta0`, and `sigma >= 0`.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta0", self.beta0),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("theta", self.theta),
            ("sigma", self.sigma),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Domain(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        if 1.0 + self.theta * self.alpha0 <= 0.0 {
            return Err(Error::Domain(format!(
                "1 + theta*alpha0 must be positive, got {}",
                1.0 + self.theta * self.alpha0
            )));
        }
        if (self.alpha0 - self.beta0).abs() < SLOPE_GAP_TOL {
            return Err(Error::SingularModel(format!(
                "alpha0 ({}) and beta0 ({}) coincide; the equilibrium system is singular",
                self.alpha0, self.beta0
            )));
        }
        if self.sigma < 0.0 {
            return Err(Error::Domain(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// One market's exogenous state: shifters in levels, instruments on the
/// log-plus-noise scale, and the two structural errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExogenousDraw {
    /// Demand shifters (levels, strictly positive).
    pub x1d: f64,
    pub x2d: f64,
    /// Cost shifters (levels, strictly positive).
    pub x1s: f64,
    pub x2s: f64,
    /// Noisy cost-shifter instruments, already on the log scale.
    pub z1s: f64,
    pub z2s: f64,
    /// Structural errors (log scale).
    pub eps_d: f64,
    pub eps_s: f64,
}

impl ExogenousDraw {
    /// Shifters must be strictly positive (their logs enter the equilibrium);
    /// everything must be finite.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("x1d", self.x1d),
            ("x2d", self.x2d),
            ("x1s", self.x1s),
            ("x2s", self.x2s),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Domain(format!(
                    "shifter {name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("z1s", self.z1s),
            ("z2s", self.z2s),
            ("eps_d", self.eps_d),
            ("eps_s", self.eps_s),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Log-scale market equilibrium.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub log_q: f64,
    pub log_p: f64,
}

/// Supply-relation intercept `gamma = -log(1 + theta*alpha0)`.
///
/// Errors with [`Error::Domain`] when `1 + theta*alpha0 <= 0`, in which case
/// the log-linear supply relation does not exist.
pub fn supply_intercept(params: &StructuralParams) -> Result<f64> {
    let markup = 1.0 + params.theta * params.alpha0;
    if markup <= 0.0 || markup.is_nan() {
        return Err(Error::Domain(format!(
            "1 + theta*alpha0 must be positive for the supply intercept, got {markup}"
        )));
    }
    Ok(-markup.ln())
}

/// Log price implied by the inverse demand at a given log quantity.
pub fn demand_log_price(params: &StructuralParams, log_q: f64, draw: &ExogenousDraw) -> f64 {
    params.alpha0 * log_q
        + params.alpha1 * draw.x1d.ln()
        + params.alpha2 * draw.x2d.ln()
        + draw.eps_d
}

/// Log price implied by the supply relation at a given log quantity.
pub fn supply_log_price(
    params: &StructuralParams,
    log_q: f64,
    draw: &ExogenousDraw,
) -> Result<f64> {
    let gamma = supply_intercept(params)?;
    Ok(gamma
        + params.beta0 * log_q
        + params.beta1 * draw.x1s.ln()
        + params.beta2 * draw.x2s.ln()
        + draw.eps_s)
}

/// Solves the demand/supply system in logs.
///
/// The log-linear system has the closed form
/// `log_q = (gamma + beta1*log x1s + beta2*log x2s + eps_s
///           - alpha1*log x1d - alpha2*log x2d - eps_d) / (alpha0 - beta0)`
/// and `log_p` follows from the demand equation.
pub fn solve_equilibrium(
    params: &StructuralParams,
    draw: &ExogenousDraw,
) -> Result<EquilibriumPoint> {
    draw.validate()?;
    let gamma = supply_intercept(params)?;
    let denom = params.alpha0 - params.beta0;
    if denom.abs() < SLOPE_GAP_TOL {
        return Err(Error::SingularModel(format!(
            "alpha0 ({}) and beta0 ({}) coincide; no unique equilibrium",
            params.alpha0, params.beta0
        )));
    }
    let log_q = (gamma
        + params.beta1 * draw.x1s.ln()
        + params.beta2 * draw.x2s.ln()
        + draw.eps_s
        - params.alpha1 * draw.x1d.ln()
        - params.alpha2 * draw.x2d.ln()
        - draw.eps_d)
        / denom;
    let log_p = demand_log_price(params, log_q, draw);
    if !log_q.is_finite() || !log_p.is_finite() {
        return Err(Error::Numerical(format!(
            "equilibrium is not finite: log_q = {log_q}, log_p = {log_p}"
        )));
    }
    Ok(EquilibriumPoint { log_q, log_p })
}

/// Outcome of the numeric separability check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeparabilityVerdict {
    /// True when the shifter-partial ratio is flat in quantity.
    pub separable: bool,
    /// Central-difference derivative of the ratio with respect to quantity.
    pub q_derivative: f64,
    /// Ratio of shifter partials at the evaluation point.
    pub ratio: f64,
}

/// Default outer step for [`check_separability`], scaled to the quantity.
pub fn default_separability_step(q: f64) -> f64 {
    1e-4 * q.abs().max(1.0)
}

/// Numeric test of the ratio condition for separability: inverse demand is
/// separable in the shifters exactly when `(dP/dx1) / (dP/dx2)` does not vary
/// with `Q`.
///
/// Shifter partials are central differences with step `1e-5 * max(1, |x_i|)`;
/// the ratio's derivative in `Q` is a central difference with the supplied
/// outer `step`. The verdict is separable when
/// `|derivative| <= SEPARABILITY_RTOL * (1 + |ratio|)`.
pub fn check_separability<F>(
    demand: F,
    q: f64,
    xd: [f64; 2],
    step: f64,
) -> Result<SeparabilityVerdict>
where
    F: Fn(f64, [f64; 2]) -> f64,
{
    if q <= 0.0 || !q.is_finite() {
        return Err(Error::Domain(format!(
            "quantity must be finite and positive, got {q}"
        )));
    }
    if xd.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
        return Err(Error::Domain(format!(
            "shifters must be finite and positive, got {xd:?}"
        )));
    }
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::Domain(format!(
            "step must be finite and positive, got {step}"
        )));
    }
    if q - step <= 0.0 {
        return Err(Error::Domain(format!(
            "step {step} too large: q - step must stay positive (q = {q})"
        )));
    }

    let partial_ratio = |q_eval: f64| -> Result<f64> {
        let mut partials = [0.0_f64; 2];
        for i in 0..2 {
            let h = 1e-5 * xd[i].abs().max(1.0);
            let mut hi = xd;
            let mut lo = xd;
            hi[i] += h;
            lo[i] -= h;
            let (f_hi, f_lo) = (demand(q_eval, hi), demand(q_eval, lo));
            if !f_hi.is_finite() || !f_lo.is_finite() {
                return Err(Error::Numerical(format!(
                    "demand evaluation not finite near q = {q_eval}, xd = {xd:?}"
                )));
            }
            partials[i] = (f_hi - f_lo) / (2.0 * h);
        }
        let [num, den] = partials;
        if den.abs() <= 1e-10 * (1.0 + num.abs()) {
            return Err(Error::Degenerate(format!(
                "partial with respect to the second shifter vanishes at q = {q_eval} \
                 ({den}); the partial ratio is undefined"
            )));
        }
        Ok(num / den)
    };

    let ratio = partial_ratio(q)?;
    let derivative = (partial_ratio(q + step)? - partial_ratio(q - step)?) / (2.0 * step);
    if !derivative.is_finite() {
        return Err(Error::Numerical(format!(
            "ratio derivative not finite at q = {q}"
        )));
    }
    Ok(SeparabilityVerdict {
        separable: derivative.abs() <= SEPARABILITY_RTOL * (1.0 + ratio.abs()),
        q_derivative: derivative,
        ratio,
    })
}

/// Deterministic part of the power inverse demand, as a handle suitable for
/// [`check_separability`].
pub fn power_inverse_demand(
    alpha0: f64,
    alpha1: f64,
    alpha2: f64,
) -> impl Fn(f64, [f64; 2]) -> f64 {
    move |q, xd| q.powf(alpha0) * xd[0].powf(alpha1) * xd[1].powf(alpha2)
}

/// True when the pure power demand `Q^alpha0 * r(Xd)` lies in the exceptional
/// separable family `P = Q^(-1/theta) * r(Xd) + s(Q)` (with `s = 0`), i.e.
/// when `alpha0 = -1/theta`. Conduct is identified within the power family
/// precisely because the baseline calibration fails this test.
pub fn lau_exception_check(alpha0: f64, theta: f64) -> Result<bool> {
    if !alpha0.is_finite() || !theta.is_finite() {
        return Err(Error::Domain(format!(
            "alpha0 and theta must be finite, got {alpha0}, {theta}"
        )));
    }
    if theta == 0.0 {
        return Err(Error::Domain(
            "theta = 0 leaves the exponent -1/theta undefined".to_string(),
        ));
    }
    Ok((alpha0 + 1.0 / theta).abs() <= EXCEPTIONAL_FORM_TOL)
}
