//! Stability analysis of the equivalent two-step method.
//!
//! Everything here works on `rho(eta) - z sigma(eta)` with
//! `rho = a2 eta^2 + a1 eta + a0` and
//! `sigma = theta b2 eta^2 + (1 - theta + theta b1) eta + theta b0`.
//! In variable mode the step ratio `tau` is frozen, which turns each step into
//! a constant-coefficient two-step method.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stepper::multistep_coeffs;
use crate::types::{MethodParams, StepMode};

/// Slack on `|eta| <= 1` when classifying roots.
pub const UNIT_CIRCLE_TOL: f64 = 1e-9;
/// Slack on the sign tests of the closed-form predicates and Dahlquist parameters.
pub const PREDICATE_TOL: f64 = 1e-12;
/// `|sigma(e^{i phi})|` at or below this puts the locus point at infinity.
pub const SIGMA_ZERO_TOL: f64 = 1e-8;

/// Coefficients ordered `[eta^2, eta^1, eta^0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicPolys {
    pub rho: [f64; 3],
    pub sigma: [f64; 3],
}

fn horner(p: &[f64; 3], x: Complex64) -> Complex64 {
    (x * p[0] + p[1]) * x + p[2]
}

impl CharacteristicPolys {
    pub fn rho_at(&self, eta: Complex64) -> Complex64 {
        horner(&self.rho, eta)
    }

    pub fn sigma_at(&self, eta: Complex64) -> Complex64 {
        horner(&self.sigma, eta)
    }

    /// `rho'(1)`.
    pub fn rho_slope(&self) -> f64 {
        2.0 * self.rho[0] + self.rho[1]
    }

    /// Largest root modulus of `rho(eta) - z sigma(eta)`.
    ///
    /// A vanishing leading coefficient sends a root to infinity, so the result
    /// is `f64::INFINITY`. A polynomial that vanishes identically is an error.
    pub fn max_root_modulus(&self, z: Complex64) -> Result<f64> {
        let c: [Complex64; 3] = std::array::from_fn(|i| self.rho[i] - z * self.sigma[i]);
        let scale = c.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        if scale == 0.0 || scale <= 1e-14 * (self.rho.iter().chain(&self.sigma).fold(0.0_f64, |m, v| m.max(v.abs())) * (1.0 + z.norm())) {
            return Err(Error::DegeneratePolynomial { re: z.re, im: z.im });
        }
        if c[0].norm() <= 1e-14 * scale {
            return Ok(f64::INFINITY);
        }
        let (r1, r2) = quadratic_roots(c[0], c[1], c[2]);
        Ok(r1.norm().max(r2.norm()))
    }

    fn is_stable_at(&self, z: Complex64) -> bool {
        matches!(self.max_root_modulus(z), Ok(m) if m <= 1.0 + UNIT_CIRCLE_TOL)
    }
}

/// Roots of `a x^2 + b x + c` with `a != 0`, avoiding cancellation.
pub fn quadratic_roots(a: Complex64, b: Complex64, c: Complex64) -> (Complex64, Complex64) {
    let mut s = (b * b - a * c * 4.0).sqrt();
    if (b.conj() * s).re < 0.0 {
        s = -s;
    }
    let q = -(b + s) * 0.5;
    if q == Complex64::new(0.0, 0.0) {
        // b = 0 and c = 0
        return (q, q);
    }
    (q / a, c / q)
}

pub fn characteristic_polys(params: &MethodParams, tau: f64) -> Result<CharacteristicPolys> {
    let m = multistep_coeffs(params, tau)?;
    let th = params.theta;
    Ok(CharacteristicPolys {
        rho: [m.alpha.0, m.alpha.1, m.alpha.2],
        sigma: [th * m.beta.0, 1.0 - th + th * m.beta.1, th * m.beta.2],
    })
}

/// Closed-form 0-stability: `-2 <= nu < 2` for equal steps, and
/// `-(1+tau)/tau <= nu < (1+tau)/tau` for ratio `tau`.
pub fn is_zero_stable(params: &MethodParams, tau: f64) -> bool {
    let bound = match params.step_mode {
        StepMode::Constant => 2.0,
        StepMode::Variable => {
            if tau.is_nan() || tau <= 0.0 {
                return false;
            }
            (1.0 + tau) / tau
        }
    };
    -bound <= params.nu && params.nu < bound
}

/// Roots of `rho`: `1` and the parasitic root `nu/2` (or `tau nu/(1+tau)`).
pub fn rho_roots(params: &MethodParams, tau: f64) -> (f64, f64) {
    let parasitic = match params.step_mode {
        StepMode::Constant => params.nu / 2.0,
        StepMode::Variable => tau * params.nu / (1.0 + tau),
    };
    (1.0, parasitic)
}

/// Closed-form A-stability.
///
/// Equal steps: `theta >= 1/2` and `2 - 4 theta <= (2 theta + 1) nu <= 4 theta - 2`.
///
/// Ratio `tau`: the exact conditions for `Re(rho conj(sigma)) >= 0` on the unit
/// circle, together with a strictly stable parasitic root and `rho'(1) > 0`.
/// Writing `x = cos(phi)`, `Re(rho conj(sigma))` is `(1 - x)` times a linear
/// function of `x`, so it suffices to check that function at `x = 1` and
/// `x = -1`. The `x = 1` end gives the lower bound
/// `nu >= (1 - 2 theta)(1 + tau)/(1 + 2 theta tau)`. The `x = -1` end is a
/// quadratic in `nu`; at `tau = 1` its admissible set is
/// `nu <= 2(2 theta - 1)/(2 theta + 1)`, but for `tau != 1` it differs from
/// `(2 theta - 1)(1 + tau)/((1 + 2 theta) tau)`.
///
/// Degenerate coefficients (`nu = 2`, `nu = 1 + tau`) are reported as not A-stable.
pub fn is_a_stable(params: &MethodParams, tau: f64) -> bool {
    let (th, nu) = (params.theta, params.nu);
    match params.step_mode {
        StepMode::Constant => {
            let m = (2.0 * th + 1.0) * nu;
            th >= 0.5 && 2.0 - 4.0 * th <= m + PREDICATE_TOL && m <= 4.0 * th - 2.0 + PREDICATE_TOL
        }
        StepMode::Variable => {
            if multistep_coeffs(params, tau).is_err() {
                return false;
            }
            let (_, parasitic) = rho_roots(params, tau);
            if parasitic.is_nan() || parasitic.abs() >= 1.0 {
                return false;
            }
            let d = 1.0 + tau - nu;
            if (1.0 + tau - tau * nu) / d <= 0.0 {
                return false;
            }
            let (lower, upper) = re_rho_sigma_ends(th, nu, tau);
            lower >= -PREDICATE_TOL && upper >= -PREDICATE_TOL
        }
    }
}

/// The two end values (at `cos phi = 1` and `cos phi = -1`) of the linear
/// factor of `Re(rho conj(sigma))`, both scaled by `(1 + tau - nu)^2`.
fn re_rho_sigma_ends(th: f64, nu: f64, tau: f64) -> (f64, f64) {
    let t = tau;
    let lower = (1.0 + t + t * nu) * ((1.0 + 2.0 * th * t) * nu - (1.0 - 2.0 * th) * (1.0 + t));
    let upper = 2.0 * nu * nu * t * t * th + nu * nu * t - 4.0 * nu * t * t * th - nu * t * t
        - 4.0 * nu * t * th
        + nu
        + 2.0 * t * t * th
        - t * t
        + 4.0 * t * th
        - 2.0 * t
        + 2.0 * th
        - 1.0;
    (lower, upper)
}

/// Dahlquist's parameters of a consistent two-step method. A-stable exactly
/// when all three are non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DahlquistParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `rho'(1)` before normalization. `rho` is divided by it, which keeps the
    /// stability region's half-plane structure only when it is positive.
    pub rho_slope: f64,
}

impl DahlquistParams {
    pub fn is_a_stable(&self) -> bool {
        self.rho_slope > 0.0 && self.a >= -PREDICATE_TOL && self.b >= -PREDICATE_TOL && self.c >= -PREDICATE_TOL
    }
}

/// `c = -a1`, `b = 1 - 2 s1`, `a + c = 2(s2 - s0)` after scaling `rho` so that
/// `rho'(1) = 1`. Since `sigma(1) = 1` for every member of the family, the
/// scaled pair is a consistent two-step method and the parameterization
/// applies even in variable mode, where `rho'(1) != 1`.
pub fn dahlquist_abc(polys: &CharacteristicPolys) -> DahlquistParams {
    let slope = polys.rho_slope();
    let c = -polys.rho[1] / slope;
    let b = 1.0 - 2.0 * polys.sigma[1];
    let a = 2.0 * (polys.sigma[0] - polys.sigma[2]) - c;
    DahlquistParams {
        a,
        b,
        c,
        rho_slope: slope,
    }
}

fn require_constant(params: &MethodParams) -> Result<()> {
    match params.step_mode {
        StepMode::Constant => Ok(()),
        StepMode::Variable => Err(Error::InvalidParameter(
            "closed-form locus is only available in constant mode".into(),
        )),
    }
}

/// `rho(e^{i phi}) / sigma(e^{i phi})` by direct complex evaluation.
pub fn boundary_locus_direct(polys: &CharacteristicPolys, phi: f64) -> Result<Complex64> {
    let zeta = Complex64::from_polar(1.0, phi);
    let s = polys.sigma_at(zeta);
    if s.norm() <= SIGMA_ZERO_TOL {
        return Err(Error::SigmaVanishes { phi });
    }
    Ok(polys.rho_at(zeta) / s)
}

/// Closed-form boundary locus point at angle `phi` (constant mode).
pub fn boundary_locus(params: &MethodParams, phi: f64) -> Result<Complex64> {
    require_constant(params)?;
    let polys = characteristic_polys(params, 1.0)?;
    let zeta = Complex64::from_polar(1.0, phi);
    if polys.sigma_at(zeta).norm() <= SIGMA_ZERO_TOL {
        return Err(Error::SigmaVanishes { phi });
    }
    let (th, nu) = (params.theta, params.nu);
    let a = 2.0 - nu - th * (2.0 + nu);
    let (c1, s1) = (phi.cos(), phi.sin());
    let (c2, s2) = ((2.0 * phi).cos(), (2.0 * phi).sin());
    let dr = 2.0 * th * c2 + a * c1 + nu * th;
    let di = 2.0 * th * s2 + a * s1;
    let d = dr * dr + di * di;
    let re = (4.0 * (2.0 * th - 1.0) + nu * nu * (2.0 * th + 1.0) - 8.0 * nu * th * c1) * (1.0 - c1) / d;
    let im = (2.0 - nu).powi(2) * s1 / d;
    Ok(Complex64::new(re, im))
}

/// Where the locus crosses the real axis at `phi = pi`:
/// `2(2 + nu)/((2 theta + 1) nu + 2(2 theta - 1))`.
pub fn locus_crossing(theta: f64, nu: f64) -> f64 {
    2.0 * (2.0 + nu) / ((2.0 * theta + 1.0) * nu + 2.0 * (2.0 * theta - 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocusCurve {
    /// `(phi, z)` pairs; angles where `sigma` vanishes are left out.
    pub samples: Vec<(f64, Complex64)>,
}

/// `n` equally spaced locus samples on `[0, 2 pi)` (constant mode).
pub fn locus_curve(params: &MethodParams, n: usize) -> Result<LocusCurve> {
    require_constant(params)?;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let phi = 2.0 * PI * i as f64 / n as f64;
        match boundary_locus(params, phi) {
            Ok(z) => samples.push((phi, z)),
            Err(Error::SigmaVanishes { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(LocusCurve { samples })
}

/// A0-stability from the sign of the `phi = pi` crossing:
/// `(2 theta + 1) nu + 2(2 theta - 1) >= 0`. Equality puts the crossing at
/// infinity (trapezoid, or the edge `nu = -2/3` at `theta = 1`), which still
/// leaves the whole negative axis stable. Returns false outside the 0-stable
/// range `-2 <= nu < 2`.
pub fn is_a0_stable(theta: f64, nu: f64) -> bool {
    (-2.0..2.0).contains(&nu) && (2.0 * theta + 1.0) * nu + 2.0 * (2.0 * theta - 1.0) >= -PREDICATE_TOL
}

/// Stability raster over a rectangle of the `z = k lambda` plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    /// Row-major by imaginary index: entry `j * nx + i` is the point
    /// `(re_i, im_j)`.
    pub stable: Vec<bool>,
}

impl RegionGrid {
    pub fn re(&self, i: usize) -> f64 {
        lerp(self.re_range, i, self.nx)
    }

    pub fn im(&self, j: usize) -> f64 {
        lerp(self.im_range, j, self.ny)
    }

    pub fn z(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re(i), self.im(j))
    }

    pub fn is_stable(&self, i: usize, j: usize) -> bool {
        self.stable[j * self.nx + i]
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.re_range.1 - self.re_range.0) / (self.nx - 1) as f64,
            (self.im_range.1 - self.im_range.0) / (self.ny - 1) as f64,
        )
    }
}

fn lerp(r: (f64, f64), i: usize, n: usize) -> f64 {
    if i + 1 == n {
        r.1
    } else {
        r.0 + (r.1 - r.0) * i as f64 / (n - 1) as f64
    }
}

fn thread_pool() -> Option<rayon::ThreadPool> {
    let n = std::env::var("THETAFILTER_THREADS").ok()?.parse::<usize>().ok()?;
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()
}

/// Run `f` on the pool capped by `THETAFILTER_THREADS`, or the global pool.
fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match thread_pool() {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Mark each grid point stable when every root of `rho - z sigma` has
/// modulus at most `1 + UNIT_CIRCLE_TOL`.
pub fn region_raster(
    params: &MethodParams,
    tau: f64,
    re_range: (f64, f64),
    im_range: (f64, f64),
    nx: usize,
    ny: usize,
) -> Result<RegionGrid> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidParameter(format!("grid {nx}x{ny} needs at least 2 points per axis")));
    }
    let finite = [re_range.0, re_range.1, im_range.0, im_range.1].iter().all(|v| v.is_finite());
    if !finite || re_range.0 >= re_range.1 || im_range.0 >= im_range.1 {
        return Err(Error::InvalidParameter(format!(
            "ranges must be finite and increasing, got {re_range:?} x {im_range:?}"
        )));
    }
    let polys = characteristic_polys(params, tau)?;
    let mut grid = RegionGrid {
        re_range,
        im_range,
        nx,
        ny,
        stable: Vec::new(),
    };
    let stable = with_pool(|| {
        (0..nx * ny)
            .into_par_iter()
            .map(|idx| polys.is_stable_at(grid.z(idx % nx, idx / nx)))
            .collect()
    });
    grid.stable = stable;
    Ok(grid)
}

/// Sample points for the brute-force checks: `z = 0` plus a log-radial grid
/// with radii in `[1e-6, 1e6]` and angles in `[theta_lo, theta_hi]`.
fn radial_samples(n_samples: usize, angles: (f64, f64)) -> Vec<Complex64> {
    let side = ((n_samples as f64).sqrt().floor() as usize).max(2);
    let mut pts = Vec::with_capacity(side * side + 1);
    pts.push(Complex64::new(0.0, 0.0));
    for i in 0..side {
        let r = 10f64.powf(-6.0 + 12.0 * i as f64 / (side - 1) as f64);
        for j in 0..side {
            let a = angles.0 + (angles.1 - angles.0) * j as f64 / (side - 1) as f64;
            pts.push(Complex64::from_polar(r, a));
        }
    }
    pts
}

fn all_stable(polys: &CharacteristicPolys, pts: &[Complex64]) -> bool {
    with_pool(|| pts.par_iter().all(|&z| polys.is_stable_at(z)))
}

/// Brute-force A-stability: about `n_samples` points of the closed left
/// half-plane out to `|z| = 1e6`, with both ends of the angle range on the
/// imaginary axis. Degenerate coefficients count as not A-stable.
pub fn a_stability_oracle(params: &MethodParams, tau: f64, n_samples: usize) -> bool {
    let Ok(polys) = characteristic_polys(params, tau) else {
        return false;
    };
    all_stable(&polys, &radial_samples(n_samples, (PI / 2.0, 1.5 * PI)))
}

/// Brute-force A0-stability: `n_samples` log-spaced points of the negative
/// real axis out to `1e6`, plus `z = 0`.
pub fn a0_stability_oracle(params: &MethodParams, tau: f64, n_samples: usize) -> bool {
    let Ok(polys) = characteristic_polys(params, tau) else {
        return false;
    };
    let n = n_samples.max(2);
    let mut pts = vec![Complex64::new(0.0, 0.0)];
    pts.extend((0..n).map(|i| Complex64::new(-(10f64.powf(-6.0 + 12.0 * i as f64 / (n - 1) as f64)), 0.0)));
    all_stable(&polys, &pts)
}

/// Sampled check that the wedge `|arg(-z)| <= alpha` is inside the stability
/// region. There is no closed form behind this; it is a raster inspection.
pub fn wedge_stable_sampled(params: &MethodParams, tau: f64, alpha: f64, n_samples: usize) -> bool {
    let Ok(polys) = characteristic_polys(params, tau) else {
        return false;
    };
    all_stable(&polys, &radial_samples(n_samples, (PI - alpha, PI + alpha)))
}
