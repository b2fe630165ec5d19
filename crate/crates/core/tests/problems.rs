use proptest::prelude::*;
use thetafilter::problems::{linear_test, lorenz, pendulum, pendulum_energy, PENDULUM_G, PENDULUM_L};

proptest! {
    #[test]
    fn lorenz_is_symmetric_under_xy_flip(x in -30.0..30.0f64, y in -30.0..30.0f64, z in 0.0..60.0f64) {
        let p = lorenz();
        let f = p.rhs(0.0, &[x, y, z]).unwrap();
        let g = p.rhs(0.0, &[-x, -y, z]).unwrap();
        prop_assert!((f[0] + g[0]).abs() < 1e-12 && (f[1] + g[1]).abs() < 1e-12 && (f[2] - g[2]).abs() < 1e-12);
    }

    #[test]
    fn pendulum_energy_is_a_first_integral(th in -10.0..10.0f64, v in -20.0..20.0f64) {
        let p = pendulum();
        let f = p.rhs(0.0, &[th, v]).unwrap();
        // chain rule: dE/dt = v v' + g L sin(th) th'
        let de = v * f[1] + PENDULUM_G * PENDULUM_L * th.sin() * f[0];
        prop_assert!(de.abs() < 1e-9 * (1.0 + v.abs()));
        prop_assert!(pendulum_energy(&[th, v]) >= 0.0);
    }

    #[test]
    fn linear_exact_solves_the_ode(lambda in -50.0..5.0f64, t in 0.0..1.0f64) {
        let p = linear_test(lambda);
        let h = 1e-6;
        let d = (p.exact(t + h).unwrap()[0] - p.exact(t - h).unwrap()[0]) / (2.0 * h);
        let f = p.rhs(t, &p.exact(t).unwrap()).unwrap()[0];
        prop_assert!((d - f).abs() <= 1e-6 * (1.0 + f.abs()));
    }
}
