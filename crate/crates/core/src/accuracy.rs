//! Closed-form accuracy coefficients of the filtered theta method.
//!
//! LTE coefficients are those of the equivalent two-step method's residual,
//! expanded about `t_{n+1}`. In variable mode the expansion is in powers of
//! `k_{n-1}`, with `k_n = tau k_{n-1}`.

use crate::error::{Error, Result};
use crate::stepper::variable_denominator;
use crate::types::{MethodParams, StepMode, DEGENERATE_EPS};

/// `|c2|` at or below this counts as second order.
pub const SECOND_ORDER_TOL: f64 = 1e-12;

/// The `nu` that makes the constant-step method second order.
pub fn second_order_nu(theta: f64) -> f64 {
    2.0 * (2.0 * theta - 1.0) / (2.0 * theta + 1.0)
}

/// The `nu` that makes a step with ratio `tau` second order. Reduces to
/// [`second_order_nu`] at `tau = 1`.
pub fn second_order_nu_variable(theta: f64, tau: f64) -> f64 {
    tau * (1.0 + tau) * (2.0 * theta - 1.0) / (2.0 * theta * tau + 1.0)
}

/// Coefficient of `k^2 y''(t_{n+1})` for equal steps.
pub fn lte_coefficient_constant(theta: f64, nu: f64) -> Result<f64> {
    let d = 2.0 - nu;
    if d.abs() <= DEGENERATE_EPS {
        return Err(Error::DegenerateDenominator {
            what: "2 - nu",
            nu,
            value: d,
        });
    }
    Ok(0.5 * ((3.0 * nu - 2.0) / d + 2.0 * (1.0 - theta)))
}

/// Coefficient of `k_{n-1}^2 y''(t_{n+1})` for step ratio `tau`.
pub fn lte_coefficient_variable(theta: f64, nu: f64, tau: f64) -> Result<f64> {
    let d = variable_denominator(nu, tau)?;
    let t2 = tau * tau;
    Ok(0.5 * ((nu + 2.0 * nu * tau - tau - t2) * tau / d + 2.0 * (1.0 - theta) * t2))
}

/// Third-order LTE terms for a second-order step: the coefficients of
/// `k_{n-1}^3 y'''` and of `k_{n-1}^3 f_y y''`.
///
/// Only meaningful when `nu` is the second-order value for the method's theta
/// and `tau`; theta itself drops out.
pub fn lte_third_order_variable(nu: f64, tau: f64) -> Result<(f64, f64)> {
    let d = variable_denominator(nu, tau)?;
    let t2 = tau * tau;
    let lin = -tau * (nu * (2.0 + 3.0 * tau) + t2 * (tau + 1.0)) / (12.0 * d);
    let quad = -nu * tau * (nu + tau + t2) * (tau + 1.0) / (4.0 * d * d);
    Ok((lin, quad))
}

/// Leading LTE terms of one method configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LteReport {
    /// 1 or 2.
    pub order: u8,
    /// Coefficient of `k^2 y''`; zero up to [`SECOND_ORDER_TOL`] when `order == 2`.
    pub c2: f64,
    /// Coefficient of `k^3 y'''`, present when `order == 2`.
    pub c3_linear: Option<f64>,
    /// Coefficient of `k^3 f_y y''`, present when `order == 2`.
    pub c3_quadratic: Option<f64>,
}

/// LTE report for `params` at step ratio `tau` (ignored in constant mode).
pub fn lte_report(params: &MethodParams, tau: f64) -> Result<LteReport> {
    let tau = match params.step_mode {
        StepMode::Constant => 1.0,
        StepMode::Variable => tau,
    };
    let c2 = match params.step_mode {
        StepMode::Constant => lte_coefficient_constant(params.theta, params.nu)?,
        StepMode::Variable => lte_coefficient_variable(params.theta, params.nu, tau)?,
    };
    if c2.abs() > SECOND_ORDER_TOL {
        return Ok(LteReport {
            order: 1,
            c2,
            c3_linear: None,
            c3_quadratic: None,
        });
    }
    let (lin, quad) = lte_third_order_variable(params.nu, tau)?;
    Ok(LteReport {
        order: 2,
        c2,
        c3_linear: Some(lin),
        c3_quadratic: Some(quad),
    })
}

/// Smallest value of `max(|c3_linear|, |c3_quadratic|)` over an `n x n` grid of
/// `nu` in `nu_range` and `tau` in `tau_range`, skipping degenerate points.
///
/// A positive result means no grid point reaches third order. Analytically the
/// quadratic term vanishes only at `nu = 0` or `nu = -tau(1+tau)`, where the
/// linear term is `-tau^3/12` or `tau^2(1+tau)/6`, so the scan
/// is a numerical confirmation of that.
pub fn third_order_scan(nu_range: (f64, f64), tau_range: (f64, f64), n: usize) -> f64 {
    let n = n.max(2);
    let step = |r: (f64, f64), i: usize| r.0 + (r.1 - r.0) * i as f64 / (n - 1) as f64;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let tau = step(tau_range, i);
        if tau <= 0.0 {
            continue;
        }
        for j in 0..n {
            if let Ok((lin, quad)) = lte_third_order_variable(step(nu_range, j), tau) {
                best = best.min(lin.abs().max(quad.abs()));
            }
        }
    }
    best
}
