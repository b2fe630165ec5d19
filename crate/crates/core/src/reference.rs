//! Dormand-Prince 5(4) reference integrator.

use crate::error::{Error, Result};
use crate::types::{norm, IvpProblem, MethodParams, StepRecord, Trajectory};

type Frac = (i64, i64);

const fn f(n: i64, d: i64) -> Frac {
    (n, d)
}

const C: [Frac; 7] = [f(0, 1), f(1, 5), f(3, 10), f(4, 5), f(8, 9), f(1, 1), f(1, 1)];

const A: [[Frac; 6]; 7] = [
    [f(0, 1); 6],
    [f(1, 5), f(0, 1), f(0, 1), f(0, 1), f(0, 1), f(0, 1)],
    [f(3, 40), f(9, 40), f(0, 1), f(0, 1), f(0, 1), f(0, 1)],
    [f(44, 45), f(-56, 15), f(32, 9), f(0, 1), f(0, 1), f(0, 1)],
    [f(19372, 6561), f(-25360, 2187), f(64448, 6561), f(-212, 729), f(0, 1), f(0, 1)],
    [f(9017, 3168), f(-355, 33), f(46732, 5247), f(49, 176), f(-5103, 18656), f(0, 1)],
    [f(35, 384), f(0, 1), f(500, 1113), f(125, 192), f(-2187, 6784), f(11, 84)],
];

/// Fifth-order weights.
const B: [Frac; 7] = [f(35, 384), f(0, 1), f(500, 1113), f(125, 192), f(-2187, 6784), f(11, 84), f(0, 1)];

/// Embedded fourth-order weights.
const B_HAT: [Frac; 7] = [
    f(5179, 57600),
    f(0, 1),
    f(7571, 16695),
    f(393, 640),
    f(-92097, 339200),
    f(187, 2100),
    f(1, 40),
];

fn v(x: Frac) -> f64 {
    x.0 as f64 / x.1 as f64
}

fn rk_step(problem: &IvpProblem, t: f64, y: &[f64], h: f64, k1: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let dim = y.len();
    let mut ks: Vec<Vec<f64>> = Vec::with_capacity(7);
    ks.push(k1);
    for s in 1..7 {
        let mut ys = y.to_vec();
        for (j, kj) in ks.iter().enumerate() {
            let a = v(A[s][j]);
            if a != 0.0 {
                for i in 0..dim {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        ks.push(problem.rhs(t + v(C[s]) * h, &ys)?);
    }
    let mut y5 = y.to_vec();
    let mut err = vec![0.0; dim];
    for (s, ks_s) in ks.iter().enumerate() {
        let (b, e) = (v(B[s]), v(B[s]) - v(B_HAT[s]));
        for i in 0..dim {
            y5[i] += h * b * ks_s[i];
            err[i] += h * e * ks_s[i];
        }
    }
    // stage 7 is evaluated at the new point (first-same-as-last)
    let f_new = ks.pop().unwrap();
    Ok((y5, err, f_new))
}

/// Adaptive solve from `t0` to `t_end` that lands exactly on every time in
/// `stops` (sorted, inside the span). Error per component is measured against
/// `tol (1 + |y|)`.
///
/// The returned trajectory's `y_star` equals `y`, `est` is the scaled error
/// estimate of the accepted step, and `params` is a placeholder
/// (`theta = nu = 0`) since the method has none.
pub fn rk_solve(problem: &IvpProblem, tol: f64, stops: &[f64]) -> Result<Trajectory> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tol={tol} must be positive")));
    }
    let (t0, t_end) = (problem.t0(), problem.t_end());
    let mut targets: Vec<f64> = stops.iter().copied().filter(|&s| s > t0 && s < t_end).collect();
    targets.push(t_end);
    if targets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("output times must be sorted".into()));
    }
    targets.dedup();

    let mut t = t0;
    let mut y = problem.y0().to_vec();
    let mut fy = problem.rhs(t, &y)?;
    let mut records = vec![StepRecord::initial(t0, &y)];
    let d0 = norm(&y);
    let d1 = norm(&fy);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(t_end - t0);

    for &target in &targets {
        while t < target {
            let last = t + h >= target;
            let h_try = if last { target - t } else { h };
            let (y_new, err, f_new) = rk_step(problem, t, &y, h_try, fy.clone())?;
            let scaled = y
                .iter()
                .zip(&y_new)
                .zip(&err)
                .fold(0.0_f64, |m, ((a, b), e)| m.max(e.abs() / (tol * (1.0 + a.abs().max(b.abs())))));
            if !scaled.is_finite() {
                return Err(Error::StepUnderflow { t, k: h_try });
            }
            let fac = if scaled == 0.0 { 5.0 } else { (0.9 * scaled.powf(-0.2)).clamp(0.2, 5.0) };
            if scaled <= 1.0 {
                t = if last { target } else { t + h_try };
                y = y_new;
                fy = f_new;
                records.push(StepRecord {
                    t,
                    k: h_try,
                    y: y.clone(),
                    y_star: y.clone(),
                    est: scaled,
                    nu: 0.0,
                    newton_iters: 0,
                });
                // a clipped step says nothing about the natural step size
                if !last {
                    h = h_try * fac;
                }
            } else {
                h = h_try * fac.min(1.0);
                if h <= 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::StepUnderflow { t, k: h });
                }
            }
        }
    }
    let params = MethodParams::constant(0.0, 0.0)?;
    Trajectory::new(problem.id(), params, records)
}

/// Reference solution on `[t0, t_end]`.
pub fn rk_reference(problem: &IvpProblem, tol: f64) -> Result<Trajectory> {
    rk_solve(problem, tol, &[])
}
