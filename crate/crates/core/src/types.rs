//! Domain types shared by the stepper, the drivers and the analysis code.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Right-hand side `f(t, y)`.
pub type RhsFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;
/// Row-major Jacobian `df/dy(t, y)`, `dim * dim` entries.
pub type JacobianFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;
/// Closed-form solution `y(t)`.
pub type ExactFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// Name of the vector norm used for EST and all error measurements.
pub const NORM_NAME: &str = "max";

/// Max norm; the single norm used throughout the crate.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Max norm of `a - b`.
pub fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// An initial value problem `y' = f(t, y)`, `y(t0) = y0` on `[t0, t_end]`.
#[derive(Clone)]
pub struct IvpProblem {
    id: String,
    dim: usize,
    rhs: Arc<RhsFn>,
    jacobian: Option<Arc<JacobianFn>>,
    exact: Option<Arc<ExactFn>>,
    y0: Vec<f64>,
    t0: f64,
    t_end: f64,
}

impl fmt::Debug for IvpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IvpProblem")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("y0", &self.y0)
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .field("has_jacobian", &self.jacobian.is_some())
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl IvpProblem {
    pub fn new<F>(id: impl Into<String>, y0: Vec<f64>, t0: f64, t_end: f64, rhs: F) -> Result<Self>
    where
        F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        let dim = y0.len();
        if dim == 0 {
            return Err(Error::InvalidProblem("state dimension must be at least 1".into()));
        }
        if !(t0.is_finite() && t_end.is_finite() && t0 < t_end) {
            return Err(Error::InvalidProblem(format!(
                "time span must satisfy t0 < t_end, got [{t0}, {t_end}]"
            )));
        }
        let f0 = rhs(t0, &y0);
        if f0.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f0.len(),
            });
        }
        Ok(Self {
            id: id.into(),
            dim,
            rhs: Arc::new(rhs),
            jacobian: None,
            exact: None,
            y0,
            t0,
            t_end,
        })
    }

    /// Attach a closed-form solution. It must reproduce `y0` at `t0`.
    pub fn with_exact<F>(mut self, exact: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        let e0 = exact(self.t0);
        if e0.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: e0.len(),
            });
        }
        if norm_diff(&e0, &self.y0) > 1e-12 {
            return Err(Error::InvalidProblem(format!(
                "exact solution at t0 is {e0:?}, initial state is {:?}",
                self.y0
            )));
        }
        self.exact = Some(Arc::new(exact));
        Ok(self)
    }

    /// Attach an analytic Jacobian (row-major).
    pub fn with_jacobian<F>(mut self, jac: F) -> Self
    where
        F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Result<Self> {
        if !(t_end.is_finite() && self.t0 < t_end) {
            return Err(Error::InvalidProblem(format!(
                "t_end={t_end} must exceed t0={}",
                self.t0
            )));
        }
        self.t_end = t_end;
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Evaluate `f(t, y)`, checking the output length.
    pub fn rhs(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let f = (self.rhs)(t, y);
        if f.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: f.len(),
            });
        }
        Ok(f)
    }

    /// Analytic Jacobian if one was registered.
    pub fn jacobian(&self, t: f64, y: &[f64]) -> Option<Result<Vec<f64>>> {
        self.jacobian.as_ref().map(|jac| {
            let j = jac(t, y);
            if j.len() != self.dim * self.dim {
                Err(Error::DimensionMismatch {
                    expected: self.dim * self.dim,
                    got: j.len(),
                })
            } else {
                Ok(j)
            }
        })
    }

    pub fn exact(&self, t: f64) -> Option<Vec<f64>> {
        self.exact.as_ref().map(|e| e(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Constant,
    Variable,
}

/// Distance from a coefficient denominator to zero below which it counts as degenerate.
pub const DEGENERATE_EPS: f64 = 1e-10;

/// The (theta, nu) pair plus step mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodParams {
    pub theta: f64,
    pub nu: f64,
    pub step_mode: StepMode,
}

impl MethodParams {
    pub fn new(theta: f64, nu: f64, step_mode: StepMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "theta={theta} must lie in [0, 1]"
            )));
        }
        if !nu.is_finite() {
            return Err(Error::InvalidParameter(format!("nu={nu} must be finite")));
        }
        if step_mode == StepMode::Constant && (2.0 - nu).abs() <= DEGENERATE_EPS {
            return Err(Error::DegenerateDenominator {
                what: "2 - nu",
                nu,
                value: 2.0 - nu,
            });
        }
        Ok(Self {
            theta,
            nu,
            step_mode,
        })
    }

    pub fn constant(theta: f64, nu: f64) -> Result<Self> {
        Self::new(theta, nu, StepMode::Constant)
    }

    pub fn variable(theta: f64, nu: f64) -> Result<Self> {
        Self::new(theta, nu, StepMode::Variable)
    }
}

/// One accepted step of a trajectory.
///
/// `k` is the step that produced this record; the initial record at `t0`
/// carries `k = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub k: f64,
    /// Filtered value.
    pub y: Vec<f64>,
    /// Unfiltered value from the theta step.
    pub y_star: Vec<f64>,
    /// `norm(y - y_star)`.
    pub est: f64,
    /// Filter parameter used on this step.
    pub nu: f64,
    pub newton_iters: usize,
}

impl StepRecord {
    pub fn initial(t0: f64, y0: &[f64]) -> Self {
        Self {
            t: t0,
            k: 0.0,
            y: y0.to_vec(),
            y_star: y0.to_vec(),
            est: 0.0,
            nu: 0.0,
            newton_iters: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub problem_id: String,
    pub params: MethodParams,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn new(problem_id: impl Into<String>, params: MethodParams, records: Vec<StepRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidParameter("trajectory has no records".into()));
        }
        if let Some(w) = records.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidParameter(format!(
                "trajectory times not increasing: {} then {}",
                w[0].t, w[1].t
            )));
        }
        Ok(Self {
            problem_id: problem_id.into(),
            params,
            records,
        })
    }

    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("trajectory is never empty")
    }

    /// Number of steps taken (records minus the initial one).
    pub fn steps(&self) -> usize {
        self.records.len() - 1
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.t)
    }

    pub fn max_est(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.est))
    }
}

/// Coefficients of the equivalent two-step method
/// `a2 y_{n+1} + a1 y_n + a0 y_{n-1} = k(1-theta) f_n + k theta f(t_{n+1}, b2 y_{n+1} + b1 y_n + b0 y_{n-1})`.
///
/// Tuples are ordered `(index 2, index 1, index 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultistepCoeffs {
    pub alpha: (f64, f64, f64),
    pub beta: (f64, f64, f64),
    pub theta: f64,
}

impl MultistepCoeffs {
    pub fn rho_at_one(&self) -> f64 {
        self.alpha.0 + self.alpha.1 + self.alpha.2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> IvpProblem {
        IvpProblem::new("decay", vec![1.0], 0.0, 1.0, |_, y| vec![-y[0]]).unwrap()
    }

    #[test]
    fn rejects_empty_state_and_bad_span() {
        assert!(IvpProblem::new("e", vec![], 0.0, 1.0, |_, _| vec![]).is_err());
        assert!(IvpProblem::new("s", vec![1.0], 1.0, 1.0, |_, y| y.to_vec()).is_err());
    }

    #[test]
    fn rhs_length_is_checked() {
        let err = IvpProblem::new("bad", vec![1.0], 0.0, 1.0, |_, _| vec![1.0, 2.0]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 1, got: 2 });
    }

    #[test]
    fn exact_must_match_initial_state() {
        assert!(decay().with_exact(|t| vec![(-t).exp()]).is_ok());
        assert!(decay().with_exact(|t| vec![2.0 * (-t).exp()]).is_err());
    }

    #[test]
    fn constant_mode_rejects_nu_two() {
        let err = MethodParams::constant(0.0, 2.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateDenominator { .. }));
        assert!(err.to_string().contains("nu=2 degenerate"));
        // variable mode only checks nu against 1 + tau at step time
        assert!(MethodParams::variable(0.0, 2.0).is_ok());
        assert!(MethodParams::constant(1.5, 0.0).is_err());
    }

    #[test]
    fn trajectory_requires_increasing_times() {
        let p = MethodParams::constant(1.0, 0.0).unwrap();
        let r0 = StepRecord::initial(0.0, &[1.0]);
        let mut r1 = r0.clone();
        r1.t = 0.0;
        assert!(Trajectory::new("x", p, vec![r0.clone(), r1]).is_err());
        assert!(Trajectory::new("x", p, vec![]).is_err());
        assert!(Trajectory::new("x", p, vec![r0]).is_ok());
    }

    #[test]
    fn max_norm() {
        assert_eq!(norm(&[1.0, -3.0, 2.0]), 3.0);
        assert_eq!(norm_diff(&[1.0, 2.0], &[1.5, 0.0]), 2.0);
    }
}
