use approx::assert_relative_eq;
use proptest::prelude::*;
use thetafilter::problems::lorenz;
use thetafilter::stability::characteristic_polys;
use thetafilter::stepper::{filtered_step, theta_step};
use thetafilter::types::{norm, norm_diff};
use thetafilter::{IvpProblem, MethodParams, NewtonConfig};

fn decay(lambda: f64) -> IvpProblem {
    IvpProblem::new("decay", vec![1.0], 0.0, 1.0, move |_, y| vec![lambda * y[0]]).unwrap()
}

#[test]
fn lorenz_trapezoid_matches_fixed_point_iteration() {
    let p = lorenz();
    let (t, k) = (0.0, 0.01);
    let y_n = [0.0, 1.0, 0.0];

    // damped iteration on y = y_n + k/2 (f_n + f(y)), run until it stops moving
    let f_n = p.rhs(t, &y_n).unwrap();
    let mut y = y_n.to_vec();
    for _ in 0..500 {
        let f = p.rhs(t + k, &y).unwrap();
        let next: Vec<f64> = (0..3).map(|i| y_n[i] + 0.5 * k * (f_n[i] + f[i])).collect();
        y = (0..3).map(|i| 0.5 * (y[i] + next[i])).collect();
    }

    let s = theta_step(&p, t, &y_n, k, 0.5, &NewtonConfig::default()).unwrap();
    assert!(norm_diff(&s.y_star, &y) < 1e-12 * (1.0 + norm(&y)));
    let tight = NewtonConfig {
        rel_tol: 1e-16,
        abs_tol: 1e-16,
        ..NewtonConfig::default()
    };
    let s = theta_step(&p, t, &y_n, k, 0.5, &tight).unwrap();
    assert!(norm_diff(&s.y_star, &y) < 1e-14);
}

#[test]
fn theta_step_closed_form_on_decay() {
    let (lambda, k) = (-7.0, 0.05);
    for theta in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let s = theta_step(&decay(lambda), 0.0, &[2.0], k, theta, &NewtonConfig::default()).unwrap();
        let z = k * lambda;
        let want = 2.0 * (1.0 + (1.0 - theta) * z) / (1.0 - theta * z);
        assert_relative_eq!(s.y_star[0], want, max_relative = 1e-13);
    }
}

#[test]
fn affine_solutions_are_reproduced() {
    // y = 3 - 2t solves y' = -2; every consistent configuration is exact on it
    let p = IvpProblem::new("affine", vec![3.0], 0.0, 1.0, |_, _| vec![-2.0]).unwrap();
    let exact = |t: f64| 3.0 - 2.0 * t;
    for (theta, nu) in [(0.0, -2.0), (0.5, 0.0), (1.0, 2.0 / 3.0), (0.75, 1.3)] {
        for (k, k_prev, params) in [
            (0.1, 0.1, MethodParams::constant(theta, nu).unwrap()),
            (0.1, 0.04, MethodParams::variable(theta, nu).unwrap()),
        ] {
            let (t_n, t_m) = (0.3, 0.3 - k_prev);
            let s = filtered_step(&p, t_n, &[exact(t_n)], &[exact(t_m)], k, k_prev, &params, &NewtonConfig::default())
                .unwrap();
            assert!((s.y_next[0] - exact(t_n + k)).abs() < 1e-14, "theta={theta} nu={nu}");
        }
    }
}

proptest! {
    #[test]
    fn filtered_step_satisfies_two_step_recurrence(
        theta in 0.0..=1.0f64,
        nu in -1.5..1.5f64,
        tau in 0.2..3.0f64,
        lambda in -50.0..2.0f64,
        k in 1e-3..0.05f64,
        y_n in -2.0..2.0f64,
        y_m in -2.0..2.0f64,
        variable in any::<bool>(),
    ) {
        let (params, k_prev, ratio) = if variable {
            (MethodParams::variable(theta, nu).unwrap(), k / tau, tau)
        } else {
            (MethodParams::constant(theta, nu).unwrap(), k, 1.0)
        };
        let s = filtered_step(&decay(lambda), 0.0, &[y_n], &[y_m], k, k_prev, &params, &NewtonConfig::default()).unwrap();
        let polys = characteristic_polys(&params, ratio).unwrap();
        let z = k * lambda;
        let ys = [s.y_next[0], y_n, y_m];
        let residual: f64 = (0..3).map(|i| (polys.rho[i] - z * polys.sigma[i]) * ys[i]).sum();
        prop_assert!(residual.abs() <= 1e-11 * (1.0 + ys.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    }
}
