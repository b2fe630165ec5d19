//! Integration drivers: a fixed-step loop and an EST-controlled variable-step loop.
//!
//! Both drivers take one unfiltered theta step to get `y_1`, then filter from
//! `n = 1` on. The startup record carries `est = 0` and `nu = 0`.

use crate::accuracy::second_order_nu_variable;
use crate::error::{Error, Result};
use crate::newton::NewtonConfig;
use crate::stepper::{filtered_step, theta_step, FilteredStep};
use crate::types::{norm, IvpProblem, MethodParams, StepMode, StepRecord, Trajectory};

/// Relative slack when deciding that a fixed step grid lands on `t_end`.
const GRID_SNAP: f64 = 1e-9;

fn at_t_n(err: Error, t_n: f64) -> Error {
    match err {
        Error::NonConvergence { iters, .. } => Error::NonConvergence { t: t_n, iters },
        Error::SingularJacobian { .. } => Error::SingularJacobian { t: t_n },
        e => e,
    }
}

fn startup(problem: &IvpProblem, theta: f64, k: f64, cfg: &NewtonConfig) -> Result<StepRecord> {
    let t0 = problem.t0();
    let s = theta_step(problem, t0, problem.y0(), k, theta, cfg).map_err(|e| at_t_n(e, t0))?;
    Ok(StepRecord {
        t: t0 + k,
        k,
        y: s.y_star.clone(),
        y_star: s.y_star,
        est: 0.0,
        nu: 0.0,
        newton_iters: s.newton_iters,
    })
}

fn record(t: f64, k: f64, nu: f64, s: FilteredStep) -> StepRecord {
    StepRecord {
        t,
        k,
        y: s.y_next,
        y_star: s.y_star,
        est: s.est,
        nu,
        newton_iters: s.newton_iters,
    }
}

/// Fixed step `k` from `t0` to `t_end`. Grid times are `t0 + n k`; if `k` does
/// not divide the span, a shorter final step lands on `t_end` and is filtered
/// with the variable-step filter at ratio `k_last / k`.
pub fn solve_fixed(problem: &IvpProblem, params: &MethodParams, k: f64, cfg: &NewtonConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let (t0, t_end) = (problem.t0(), problem.t_end());
    let span = t_end - t0;
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size k={k} must be positive")));
    }
    let ratio = span / k;
    if ratio < 2.0 - GRID_SNAP {
        return Err(Error::InvalidParameter(format!(
            "step k={k} leaves fewer than two steps on [{t0}, {t_end}]"
        )));
    }
    let mut n_full = ratio.floor() as usize;
    if ratio - n_full as f64 > 1.0 - GRID_SNAP {
        n_full += 1;
    }
    let tail = span - n_full as f64 * k;
    let has_tail = tail > GRID_SNAP * k;

    let mut records = Vec::with_capacity(n_full + 2);
    records.push(StepRecord::initial(t0, problem.y0()));
    records.push(startup(problem, params.theta, k, cfg)?);
    let time_at = |n: usize| if n == n_full && !has_tail { t_end } else { t0 + n as f64 * k };
    records[1].t = time_at(1);

    for n in 1..n_full {
        let (prev, cur) = (&records[n - 1], &records[n]);
        let t_n = cur.t;
        let s = filtered_step(problem, t_n, &cur.y, &prev.y, k, k, params, cfg).map_err(|e| at_t_n(e, t_n))?;
        records.push(record(time_at(n + 1), k, params.nu, s));
    }
    if has_tail {
        let (prev, cur) = (&records[n_full - 1], &records[n_full]);
        let t_n = cur.t;
        let k_last = t_end - t_n;
        let clipped = MethodParams {
            step_mode: StepMode::Variable,
            ..*params
        };
        let s = filtered_step(problem, t_n, &cur.y, &prev.y, k_last, k, &clipped, cfg).map_err(|e| at_t_n(e, t_n))?;
        records.push(record(t_end, k_last, params.nu, s));
    }
    Trajectory::new(problem.id(), *params, records)
}

/// How the adaptive driver picks `nu` on each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuPolicy {
    /// `second_order_nu_variable(theta, tau)` for the step's ratio.
    SecondOrderNu,
    Fixed(f64),
}

impl NuPolicy {
    pub fn nu(&self, theta: f64, tau: f64) -> f64 {
        match *self {
            NuPolicy::SecondOrderNu => second_order_nu_variable(theta, tau),
            NuPolicy::Fixed(nu) => nu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub tol: f64,
    pub safety: f64,
    pub k_min: f64,
    pub k_max: f64,
    /// Largest accepted ratio `k_{n+1}/k_n`. At the default of 1 the step
    /// never grows.
    pub tau_max: f64,
    pub tau_min: f64,
    pub order_for_control: u32,
    /// Starting step; estimated from `f` and `tol` when absent.
    pub k_init: Option<f64>,
}

impl ControllerConfig {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            safety: 0.9,
            k_min: 1e-12,
            k_max: 1.0,
            tau_max: 1.0,
            tau_min: 0.2,
            order_for_control: 2,
            k_init: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol={} must be positive", self.tol));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad(format!("safety={} must lie in (0, 1]", self.safety));
        }
        if !(self.k_min > 0.0 && self.k_min < self.k_max) {
            return bad(format!("need 0 < k_min < k_max, got {} and {}", self.k_min, self.k_max));
        }
        if !(self.tau_min > 0.0 && self.tau_min <= 1.0 && self.tau_max >= 1.0 && self.tau_max.is_finite()) {
            return bad(format!(
                "need 0 < tau_min <= 1 <= tau_max, got {} and {}",
                self.tau_min, self.tau_max
            ));
        }
        if self.order_for_control == 0 {
            return bad("order_for_control must be at least 1".into());
        }
        if let Some(k) = self.k_init {
            if !(k > 0.0 && k.is_finite()) {
                return bad(format!("k_init={k} must be positive"));
            }
        }
        Ok(())
    }
}

/// Starting step from `tol` and a difference estimate of `|y''|` at `t0`.
fn initial_step(problem: &IvpProblem, ctrl: &ControllerConfig) -> Result<f64> {
    let (t0, y0) = (problem.t0(), problem.y0());
    let f0 = problem.rhs(t0, y0)?;
    let (d0, d1) = (norm(y0), norm(&f0));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(&f0).map(|(y, f)| y + h0 * f).collect();
    let f1 = problem.rhs(t0 + h0, &y1)?;
    let d2 = f1.iter().zip(&f0).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())) / h0;
    let h1 = if d2 <= 1e-15 {
        (100.0 * h0).max(1e-6)
    } else {
        ctrl.safety * (ctrl.tol / d2).powf(1.0 / ctrl.order_for_control as f64)
    };
    Ok(h1.min(100.0 * h0))
}

/// Variable-step integration controlled by EST.
///
/// A step is accepted when `est <= tol`. The next step is
/// `k safety (tol/est)^(1/order)` with the ratio clamped to
/// `[tau_min, tau_max]` and `k` to `[k_min, k_max]`. A rejected step is
/// retried with the ratio clamped to `[tau_min, 0.5]`. `est` is floored at
/// `1e-16 (1 + |y|)` before the acceptance test and the formula, so a `tol`
/// below that level ends in `StepUnderflow`.
///
/// The final approach to `t_end` never increases the ratio: a step that would
/// overshoot is clipped, and one that would leave less than a full step is
/// split into two halves.
pub fn solve_adaptive(
    problem: &IvpProblem,
    theta: f64,
    ctrl: &ControllerConfig,
    cfg: &NewtonConfig,
    nu_policy: NuPolicy,
) -> Result<Trajectory> {
    ctrl.validate()?;
    cfg.validate()?;
    let (t0, t_end) = (problem.t0(), problem.t_end());
    let span = t_end - t0;
    let k0 = match ctrl.k_init {
        Some(k) => k,
        None => initial_step(problem, ctrl)?,
    };
    let mut k = k0.clamp(ctrl.k_min, ctrl.k_max).min(span / 2.0);
    let label = MethodParams::variable(theta, nu_policy.nu(theta, 1.0))?;

    let mut records = vec![StepRecord::initial(t0, problem.y0())];
    records.push(startup(problem, theta, k, cfg)?);
    let mut k_prev = k;
    k = (k * ctrl.tau_max).min(ctrl.k_max);
    let p = 1.0 / ctrl.order_for_control as f64;

    while records.last().unwrap().t < t_end {
        let n = records.len() - 1;
        let t_n = records[n].t;
        let rem = t_end - t_n;
        let last = k >= rem;
        if last {
            k = rem;
        } else if 2.0 * k > rem {
            k = rem / 2.0;
        }
        let tau = k / k_prev;
        let nu = nu_policy.nu(theta, tau);
        let params = MethodParams::variable(theta, nu)?;
        let s = filtered_step(problem, t_n, &records[n].y, &records[n - 1].y, k, k_prev, &params, cfg)
            .map_err(|e| at_t_n(e, t_n))?;
        let est = s.est.max(1e-16 * (1.0 + norm(&s.y_next)));
        let ratio = ctrl.safety * (ctrl.tol / est).powf(p);
        // acceptance also uses the floored value: an est that has rounded to
        // zero cannot certify a tol below roundoff
        if est <= ctrl.tol {
            let t = if last { t_end } else { t_n + k };
            records.push(record(t, k, nu, s));
            k_prev = k;
            k = (k * ratio.clamp(ctrl.tau_min, ctrl.tau_max)).clamp(ctrl.k_min, ctrl.k_max);
        } else {
            if k <= ctrl.k_min {
                return Err(Error::StepUnderflow { t: t_n, k });
            }
            k = (k * ratio.clamp(ctrl.tau_min, 0.5)).max(ctrl.k_min);
        }
    }
    Trajectory::new(problem.id(), label, records)
}
