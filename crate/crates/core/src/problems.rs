//! Test problems: the Lorenz system, a pendulum, and a scalar linear problem
//! with a known solution.

use std::f64::consts::PI;

use crate::types::IvpProblem;

pub const PENDULUM_G: f64 = 9.8;
pub const PENDULUM_L: f64 = 49.0;

/// `X' = 10(Y - X)`, `Y' = -XZ + 28X - Y`, `Z' = XY - (8/3)Z` from `(0, 1, 0)` on `[0, 5]`.
pub fn lorenz() -> IvpProblem {
    IvpProblem::new("lorenz", vec![0.0, 1.0, 0.0], 0.0, 5.0, |_, y| {
        vec![
            10.0 * (y[1] - y[0]),
            -y[0] * y[2] + 28.0 * y[0] - y[1],
            y[0] * y[1] - 8.0 / 3.0 * y[2],
        ]
    })
    .expect("valid problem")
    .with_jacobian(|_, y| {
        vec![
            -10.0, 10.0, 0.0, //
            28.0 - y[2], -1.0, -y[0], //
            y[1], y[0], -8.0 / 3.0,
        ]
    })
}

/// Angle and arc velocity: `angle' = v/L`, `v' = -g sin(angle)`, from
/// `(0.9 pi, 0)` on `[0, 50]`.
pub fn pendulum() -> IvpProblem {
    IvpProblem::new("pendulum", vec![0.9 * PI, 0.0], 0.0, 50.0, |_, y| {
        vec![y[1] / PENDULUM_L, -PENDULUM_G * y[0].sin()]
    })
    .expect("valid problem")
    .with_jacobian(|_, y| vec![0.0, 1.0 / PENDULUM_L, -PENDULUM_G * y[0].cos(), 0.0])
}

/// `v^2/2 + g L (1 - cos(angle))`, conserved by the exact pendulum flow.
pub fn pendulum_energy(y: &[f64]) -> f64 {
    0.5 * y[1] * y[1] + PENDULUM_G * PENDULUM_L * (1.0 - y[0].cos())
}

/// `y' = lambda (y - sin t) + cos t`, `y(0) = 1` on `[0, 1]`, with exact
/// solution `e^{lambda t} + sin t`.
pub fn linear_test(lambda: f64) -> IvpProblem {
    IvpProblem::new("linear", vec![1.0], 0.0, 1.0, move |t, y| {
        vec![lambda * (y[0] - t.sin()) + t.cos()]
    })
    .expect("valid problem")
    .with_jacobian(move |_, _| vec![lambda])
    .with_exact(move |t| vec![(lambda * t).exp() + t.sin()])
    .expect("exact solution matches y0")
}

/// Look up a problem by its CLI name. `lambda` only affects `linear`.
pub fn by_name(name: &str, lambda: f64) -> Option<IvpProblem> {
    match name {
        "lorenz" => Some(lorenz()),
        "pendulum" => Some(pendulum()),
        "linear" => Some(linear_test(lambda)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn lorenz_rhs() {
        let p = lorenz();
        assert_eq!(p.dim(), 3);
        assert_eq!(p.y0(), &[0.0, 1.0, 0.0]);
        assert_eq!(p.rhs(0.0, &[0.0, 1.0, 0.0]).unwrap(), vec![10.0, -1.0, 0.0]);
        assert!(close(&p.rhs(0.0, &[1.0, 1.0, 1.0]).unwrap(), &[0.0, 26.0, 1.0 - 8.0 / 3.0], 1e-15));
        assert_eq!(p.rhs(3.0, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!((p.t0(), p.t_end()), (0.0, 5.0));
    }

    #[test]
    fn pendulum_rhs() {
        let p = pendulum();
        let f = p.rhs(0.0, p.y0()).unwrap();
        assert_eq!(f[0], 0.0);
        assert!((f[1] + 9.8 * (0.9 * PI).sin()).abs() < 1e-15);
        assert_eq!(p.rhs(1.0, &[0.0, 2.0]).unwrap(), vec![2.0 / 49.0, 0.0]);
    }

    #[test]
    fn pendulum_energy_is_conserved_along_flow() {
        // dE/dt = v v' + g L sin(angle) angle' = 0 for the exact field
        let p = pendulum();
        for y in [[0.3, 1.0], [2.5, -4.0], [0.9 * PI, 0.0]] {
            let f = p.rhs(0.0, &y).unwrap();
            let de = y[1] * f[1] + PENDULUM_G * PENDULUM_L * y[0].sin() * f[0];
            assert!(de.abs() < 1e-12);
        }
        assert_eq!(pendulum_energy(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn linear_exact() {
        let p = linear_test(-10.0);
        assert_eq!(p.exact(0.0).unwrap(), vec![1.0]);
        assert!((p.exact(1.0).unwrap()[0] - ((-10.0f64).exp() + 1.0f64.sin())).abs() < 1e-15);
        let p0 = linear_test(0.0);
        assert!((p0.exact(0.7).unwrap()[0] - (1.0 + 0.7f64.sin())).abs() < 1e-15);
        assert!((p0.rhs(0.7, &[5.0]).unwrap()[0] - 0.7f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn exact_solutions_satisfy_ode() {
        for lambda in [-10.0, -1.0, 0.0, 0.5] {
            let p = linear_test(lambda);
            let h = 1e-6;
            for i in 0..100 {
                let t = 0.01 + 0.0098 * i as f64;
                let d = (p.exact(t + h).unwrap()[0] - p.exact(t - h).unwrap()[0]) / (2.0 * h);
                let f = p.rhs(t, &p.exact(t).unwrap()).unwrap()[0];
                assert!((d - f).abs() <= 1e-6, "lambda={lambda} t={t}");
            }
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        for p in [lorenz(), pendulum(), linear_test(-3.0)] {
            let y: Vec<f64> = (0..p.dim()).map(|i| 0.3 + 0.7 * i as f64).collect();
            let j = p.jacobian(0.2, &y).unwrap().unwrap();
            let f = p.rhs(0.2, &y).unwrap();
            for c in 0..p.dim() {
                let mut yp = y.clone();
                yp[c] += 1e-7;
                let fp = p.rhs(0.2, &yp).unwrap();
                for r in 0..p.dim() {
                    assert!(((fp[r] - f[r]) / 1e-7 - j[r * p.dim() + c]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn names() {
        assert_eq!(by_name("lorenz", 0.0).unwrap().id(), "lorenz");
        assert_eq!(by_name("linear", -2.0).unwrap().dim(), 1);
        assert!(by_name("vdp", 0.0).is_none());
    }
}
