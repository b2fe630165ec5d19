//! One step of the filtered theta method.
//!
//! Step 1 is the theta method
//! `y*_{n+1} = y_n + k((1-theta) f(t_n, y_n) + theta f(t_{n+1}, y*_{n+1}))`,
//! solved by Newton's method when `theta > 0`. Step 2 post-processes `y*_{n+1}`
//! with a 3-point filter that subtracts a multiple of the (step-ratio weighted)
//! second difference through `y_{n-1}, y_n, y*_{n+1}`.
//!
//! Composing the two steps gives a two-step linear multistep method whose
//! coefficients are available from [`multistep_coeffs`]; all of the stability
//! analysis works on those coefficients.

use crate::error::{Error, Result};
use crate::newton::{solve_implicit, NewtonConfig};
use crate::types::{norm_diff, IvpProblem, MethodParams, MultistepCoeffs, StepMode, DEGENERATE_EPS};

/// Filter weights in the form `y = y* + (a y* + b y_n + c y_{n-1})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FilterCoefficients {
    /// Weights for equal steps: `a = c = -nu/2`, `b = nu`.
    pub fn constant(nu: f64) -> Self {
        Self {
            a: -nu / 2.0,
            b: nu,
            c: -nu / 2.0,
        }
    }

    /// Weights for step ratio `tau = k_n / k_{n-1}`.
    pub fn variable(nu: f64, tau: f64) -> Result<Self> {
        check_ratio(tau)?;
        Ok(Self {
            a: -nu / (1.0 + tau),
            b: nu,
            c: -tau * nu / (1.0 + tau),
        })
    }

    pub fn apply(&self, y_star: &[f64], y_n: &[f64], y_nm1: &[f64]) -> Vec<f64> {
        y_star
            .iter()
            .zip(y_n)
            .zip(y_nm1)
            .map(|((s, n), m)| s + (self.a * s + self.b * n + self.c * m))
            .collect()
    }
}

fn check_ratio(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidRatio(tau))
    }
}

fn check_step(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("step size k={k} must be positive")))
    }
}

/// Output of [`theta_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaStep {
    pub y_star: Vec<f64>,
    pub newton_iters: usize,
}

/// Step 1: one theta-method step from `(t_n, y_n)` with step `k`.
///
/// `theta = 0` is explicit Euler and never touches Newton. Otherwise the
/// implicit equation is solved from the explicit Euler predictor.
pub fn theta_step(
    problem: &IvpProblem,
    t_n: f64,
    y_n: &[f64],
    k: f64,
    theta: f64,
    cfg: &NewtonConfig,
) -> Result<ThetaStep> {
    check_step(k)?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta={theta} must lie in [0, 1]")));
    }
    if y_n.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: y_n.len(),
        });
    }
    let f_n = problem.rhs(t_n, y_n)?;
    let t_next = t_n + k;
    if theta == 0.0 {
        let y_star = y_n.iter().zip(&f_n).map(|(y, f)| y + k * f).collect();
        return Ok(ThetaStep {
            y_star,
            newton_iters: 0,
        });
    }
    let explicit: Vec<f64> = y_n
        .iter()
        .zip(&f_n)
        .map(|(y, f)| y + k * (1.0 - theta) * f)
        .collect();
    let predictor: Vec<f64> = y_n.iter().zip(&f_n).map(|(y, f)| y + k * f).collect();
    let sol = solve_implicit(problem, t_next, &explicit, k * theta, predictor, cfg)?;
    Ok(ThetaStep {
        y_star: sol.y,
        newton_iters: sol.iters,
    })
}

/// Step 2 for equal steps: `y* - (nu/2)(y* - 2 y_n + y_{n-1})`.
pub fn filter_constant(y_star: &[f64], y_n: &[f64], y_nm1: &[f64], nu: f64) -> Vec<f64> {
    let w = nu / 2.0;
    y_star
        .iter()
        .zip(y_n)
        .zip(y_nm1)
        .map(|((s, n), m)| s - w * (s - 2.0 * n + m))
        .collect()
}

/// Step 2 for step ratio `tau`: `y* - nu/(1+tau) (y* - (1+tau) y_n + tau y_{n-1})`.
pub fn filter_variable(y_star: &[f64], y_n: &[f64], y_nm1: &[f64], nu: f64, tau: f64) -> Result<Vec<f64>> {
    check_ratio(tau)?;
    let w = nu / (1.0 + tau);
    Ok(y_star
        .iter()
        .zip(y_n)
        .zip(y_nm1)
        .map(|((s, n), m)| s - w * (s - (1.0 + tau) * n + tau * m))
        .collect())
}

/// Output of [`filtered_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredStep {
    pub y_next: Vec<f64>,
    pub y_star: Vec<f64>,
    pub est: f64,
    pub newton_iters: usize,
}

/// Step 1 followed by Step 2. Needs both `y_n` and `y_{n-1}`.
///
/// In variable mode the filter uses `tau = k_n / k_nm1` and requires
/// `nu != 1 + tau`; in constant mode `k_nm1` is ignored.
#[allow(clippy::too_many_arguments)]
pub fn filtered_step(
    problem: &IvpProblem,
    t_n: f64,
    y_n: &[f64],
    y_nm1: &[f64],
    k_n: f64,
    k_nm1: f64,
    params: &MethodParams,
    cfg: &NewtonConfig,
) -> Result<FilteredStep> {
    if y_nm1.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: y_nm1.len(),
        });
    }
    let step = theta_step(problem, t_n, y_n, k_n, params.theta, cfg)?;
    let y_next = match params.step_mode {
        StepMode::Constant => filter_constant(&step.y_star, y_n, y_nm1, params.nu),
        StepMode::Variable => {
            check_step(k_nm1)?;
            let tau = k_n / k_nm1;
            variable_denominator(params.nu, tau)?;
            filter_variable(&step.y_star, y_n, y_nm1, params.nu, tau)?
        }
    };
    let est = norm_diff(&y_next, &step.y_star);
    Ok(FilteredStep {
        y_next,
        y_star: step.y_star,
        est,
        newton_iters: step.newton_iters,
    })
}

fn constant_denominator(nu: f64) -> Result<f64> {
    let d = 2.0 - nu;
    if d.abs() <= DEGENERATE_EPS {
        return Err(Error::DegenerateDenominator {
            what: "2 - nu",
            nu,
            value: d,
        });
    }
    Ok(d)
}

pub(crate) fn variable_denominator(nu: f64, tau: f64) -> Result<f64> {
    check_ratio(tau)?;
    let d = 1.0 + tau - nu;
    if d.abs() <= DEGENERATE_EPS {
        return Err(Error::DegenerateDenominator {
            what: "1 + tau - nu",
            nu,
            value: d,
        });
    }
    Ok(d)
}

/// Coefficients of the two-step method equivalent to Step 1 + Step 2.
///
/// Constant mode ignores `tau`.
pub fn multistep_coeffs(params: &MethodParams, tau: f64) -> Result<MultistepCoeffs> {
    let nu = params.nu;
    let (alpha, beta) = match params.step_mode {
        StepMode::Constant => {
            // scaled by 2 on top and bottom: 1/(1 - nu/2) = 2/(2 - nu)
            let d = constant_denominator(nu)?;
            let a2 = 2.0 / d;
            (
                (a2, -(2.0 + nu) / d, nu / d),
                (a2, -2.0 * nu / d, nu / d),
            )
        }
        StepMode::Variable => {
            let d = variable_denominator(nu, tau)?;
            let a2 = (1.0 + tau) / d;
            let a0 = tau * nu / d;
            (
                (a2, -(1.0 + tau + tau * nu) / d, a0),
                (a2, -(nu + tau * nu) / d, a0),
            )
        }
    };
    Ok(MultistepCoeffs {
        alpha,
        beta,
        theta: params.theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(lambda: f64) -> IvpProblem {
        IvpProblem::new("lin", vec![1.0], 0.0, 1.0, move |_, y| vec![lambda * y[0]]).unwrap()
    }

    #[test]
    fn explicit_euler_when_theta_is_zero() {
        let s = theta_step(&linear(-1.0), 0.0, &[1.0], 0.1, 0.0, &NewtonConfig::default()).unwrap();
        assert!((s.y_star[0] - 0.9).abs() < 1e-15);
        assert_eq!(s.newton_iters, 0);
    }

    #[test]
    fn backward_euler_on_linear_decay() {
        let s = theta_step(&linear(-1.0), 0.0, &[1.0], 0.1, 1.0, &NewtonConfig::default()).unwrap();
        assert!((s.y_star[0] - 1.0 / 1.1).abs() < 1e-12);
        assert!(s.newton_iters >= 1);
    }

    #[test]
    fn theta_step_rejects_bad_input() {
        let p = linear(-1.0);
        let cfg = NewtonConfig::default();
        assert!(theta_step(&p, 0.0, &[1.0], 0.0, 0.5, &cfg).is_err());
        assert!(theta_step(&p, 0.0, &[1.0], 0.1, 1.5, &cfg).is_err());
        assert!(theta_step(&p, 0.0, &[1.0, 2.0], 0.1, 0.5, &cfg).is_err());
    }

    #[test]
    fn constant_filter_values() {
        assert_eq!(filter_constant(&[3.0], &[1.0], &[7.0], 0.0), vec![3.0]);
        assert_eq!(filter_constant(&[5.0], &[5.0], &[5.0], 1.3), vec![5.0]);
        let y = filter_constant(&[4.0], &[2.0], &[1.0], 2.0 / 3.0);
        assert!((y[0] - 11.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn variable_filter_values() {
        let y = filter_variable(&[4.0], &[2.0], &[1.0], 1.0, 2.0).unwrap();
        assert!((y[0] - 4.0).abs() < 1e-15);
        assert_eq!(filter_variable(&[3.0], &[1.0], &[7.0], 0.0, 0.7).unwrap(), vec![3.0]);
        assert_eq!(
            filter_variable(&[1.0], &[1.0], &[1.0], 0.5, 0.0),
            Err(Error::InvalidRatio(0.0))
        );
        assert!(filter_variable(&[1.0], &[1.0], &[1.0], 0.5, -1.0).is_err());
    }

    #[test]
    fn filter_coefficients_match_filters() {
        let (ys, yn, ym) = ([1.7, -0.3], [0.4, 0.9], [-1.1, 0.2]);
        let c = FilterCoefficients::constant(0.8);
        assert!((c.a + c.b + c.c).abs() < 1e-15 && (c.b + 2.0 * c.c).abs() < 1e-15);
        let direct = filter_constant(&ys, &yn, &ym, 0.8);
        for (u, v) in c.apply(&ys, &yn, &ym).iter().zip(&direct) {
            assert!((u - v).abs() < 1e-15);
        }
        let tau = 1.7;
        let v = FilterCoefficients::variable(0.8, tau).unwrap();
        assert!((v.a + v.b + v.c).abs() < 1e-15);
        assert!((v.b * tau + v.c * (1.0 + tau)).abs() < 1e-15);
        let direct = filter_variable(&ys, &yn, &ym, 0.8, tau).unwrap();
        for (u, w) in v.apply(&ys, &yn, &ym).iter().zip(&direct) {
            assert!((u - w).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_nu_gives_zero_est() {
        let p = linear(-2.0);
        let params = MethodParams::constant(0.5, 0.0).unwrap();
        let s = filtered_step(&p, 0.1, &[0.8], &[1.0], 0.1, 0.1, &params, &NewtonConfig::default())
            .unwrap();
        assert_eq!(s.est, 0.0);
        assert_eq!(s.y_next, s.y_star);
    }

    #[test]
    fn variable_step_rejects_degenerate_nu() {
        let p = linear(-2.0);
        let params = MethodParams::variable(1.0, 3.0).unwrap();
        // tau = 2 makes 1 + tau - nu = 0
        let err = filtered_step(&p, 0.0, &[1.0], &[1.0], 0.2, 0.1, &params, &NewtonConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateDenominator { .. }));
    }

    #[test]
    fn plain_theta_coefficients() {
        let c = multistep_coeffs(&MethodParams::constant(0.3, 0.0).unwrap(), 1.0).unwrap();
        assert_eq!(c.alpha, (1.0, -1.0, 0.0));
        assert_eq!(c.beta, (1.0, 0.0, 0.0));
    }

    #[test]
    fn second_order_backward_euler_coefficients() {
        let c = multistep_coeffs(&MethodParams::constant(1.0, 2.0 / 3.0).unwrap(), 1.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-14;
        assert!(close(c.alpha.0, 1.5) && close(c.alpha.1, -2.0) && close(c.alpha.2, 0.5));
        assert!(close(c.beta.0, 1.5) && close(c.beta.1, -1.0) && close(c.beta.2, 0.5));
    }

    #[test]
    fn variable_coefficients_reduce_at_unit_ratio() {
        for nu in [-1.5, -0.4, 0.0, 0.9, 1.7] {
            let c = multistep_coeffs(&MethodParams::constant(0.6, nu).unwrap(), 1.0).unwrap();
            let v = multistep_coeffs(&MethodParams::variable(0.6, nu).unwrap(), 1.0).unwrap();
            for (x, y) in [
                (c.alpha.0, v.alpha.0),
                (c.alpha.1, v.alpha.1),
                (c.alpha.2, v.alpha.2),
                (c.beta.0, v.beta.0),
                (c.beta.1, v.beta.1),
                (c.beta.2, v.beta.2),
            ] {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn degenerate_coefficients() {
        let p = MethodParams::variable(1.0, 1.5).unwrap();
        assert!(multistep_coeffs(&p, 0.5).is_err());
        assert!(multistep_coeffs(&p, 1.0).is_ok());
        assert!(matches!(multistep_coeffs(&p, -1.0), Err(Error::InvalidRatio(_))));
    }
}
