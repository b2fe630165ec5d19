//! Newton iteration for the implicit stage `y = r + k theta f(t, y)`.

use crate::error::{Error, Result};
use crate::types::{norm, IvpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianSource {
    /// Forward differences with perturbation `sqrt(eps) * (1 + |y_i|)`.
    FiniteDifference,
    /// The problem's registered Jacobian; falls back to finite differences if none.
    UserSupplied,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iters: usize,
    pub jacobian: JacobianSource,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_iters: 50,
            jacobian: JacobianSource::FiniteDifference,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "Newton tolerances must be positive".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_jacobian(mut self, jacobian: JacobianSource) -> Self {
        self.jacobian = jacobian;
        self
    }
}

/// Result of an implicit solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub y: Vec<f64>,
    pub iters: usize,
    /// Max-norm residual of the accepted iterate.
    pub residual: f64,
}

/// Solve `y - r - h f(t, y) = 0` starting from `guess`, where `h = k theta`.
pub(crate) fn solve_implicit(
    problem: &IvpProblem,
    t: f64,
    r: &[f64],
    h: f64,
    guess: Vec<f64>,
    cfg: &NewtonConfig,
) -> Result<NewtonSolution> {
    cfg.validate()?;
    let dim = problem.dim();
    let mut y = guess;
    let mut iters = 0;
    loop {
        let f = problem.rhs(t, &y)?;
        let g: Vec<f64> = (0..dim).map(|i| y[i] - r[i] - h * f[i]).collect();
        let res = norm(&g);
        if !res.is_finite() {
            return Err(Error::NonConvergence { t, iters });
        }
        // the predictor is never accepted on its residual alone: on stiff problems
        // a residual just under tolerance leaves an O(tol) error in every step
        if (iters > 0 || res == 0.0) && res <= cfg.abs_tol.max(cfg.rel_tol * (1.0 + norm(&y))) {
            return Ok(NewtonSolution {
                y,
                iters,
                residual: res,
            });
        }
        if iters == cfg.max_iters {
            return Err(Error::NonConvergence { t, iters });
        }

        let jf = match (cfg.jacobian, problem.jacobian(t, &y)) {
            (JacobianSource::UserSupplied, Some(j)) => j?,
            _ => fd_jacobian(problem, t, &y, &f)?,
        };
        // I - h J
        let mut m: Vec<f64> = jf.iter().map(|v| -h * v).collect();
        for i in 0..dim {
            m[i * dim + i] += 1.0;
        }
        let delta = lu_solve(&mut m, g, dim).ok_or(Error::SingularJacobian { t })?;
        for (yi, di) in y.iter_mut().zip(&delta) {
            *yi -= di;
        }
        iters += 1;
    }
}

fn fd_jacobian(problem: &IvpProblem, t: f64, y: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    let dim = y.len();
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut jac = vec![0.0; dim * dim];
    let mut yp = y.to_vec();
    for j in 0..dim {
        let dh = sqrt_eps * (1.0 + y[j].abs());
        yp[j] = y[j] + dh;
        let fp = problem.rhs(t, &yp)?;
        yp[j] = y[j];
        for i in 0..dim {
            jac[i * dim + j] = (fp[i] - f[i]) / dh;
        }
    }
    Ok(jac)
}

/// Gaussian elimination with partial pivoting on a row-major `n x n` matrix.
/// Returns `None` when a pivot is negligible relative to the matrix scale.
pub(crate) fn lu_solve(m: &mut [f64], mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let tiny = scale * 1e-14;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a * n + col].abs().total_cmp(&m[b * n + col].abs()))
            .unwrap();
        if m[pivot * n + col].abs() <= tiny {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let p = m[col * n + col];
        for row in col + 1..n {
            let factor = m[row * n + col] / p;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                m[row * n + j] -= factor * m[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|j| m[row * n + j] * x[j]).sum();
        x[row] = (b[row] - s) / m[row * n + row];
    }
    Some(x)
}
