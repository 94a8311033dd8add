use std::f64::consts::PI;

use fracmfg::hjb::{lambda_bounds, solve_ergodic, solve_ergodic_from, HjbConfig};
use fracmfg::{Hamiltonian, PeriodicGrid, SpectralField};

fn cosine(g: &PeriodicGrid) -> SpectralField {
    SpectralField::from_fn(g, |x| (2.0 * PI * x[0]).cos())
}

#[test]
fn classical_endpoint_self_convergence() {
    let h = Hamiltonian::quadratic();
    let cfg = HjbConfig::default();
    let coarse = solve_ergodic(&cosine(&PeriodicGrid::new(1, 256).unwrap()), &h, 1.0, &cfg).unwrap();
    let fine = solve_ergodic(&cosine(&PeriodicGrid::new(1, 1024).unwrap()), &h, 1.0, &cfg).unwrap();
    assert!((coarse.lambda - fine.lambda).abs() <= 1e-6, "{} vs {}", coarse.lambda, fine.lambda);
}

#[test]
fn shift_covariance() {
    let g = PeriodicGrid::new(1, 128).unwrap();
    let h = Hamiltonian::quadratic();
    let cfg = HjbConfig::default();
    let f = SpectralField::from_fn(&g, |x| (2.0 * PI * x[0]).cos() + 0.3 * (6.0 * PI * x[0]).sin());
    let c = 1.75;
    let a = solve_ergodic(&f, &h, 0.75, &cfg).unwrap();
    let b = solve_ergodic(&f.add_scalar(c), &h, 0.75, &cfg).unwrap();
    assert!((b.lambda - c - a.lambda).abs() <= 1e-12);
    assert!(a.u.max_abs_diff(&b.u) <= 1e-12);
}

#[test]
fn two_initializations_agree() {
    let g = PeriodicGrid::new(2, 32).unwrap();
    let h = Hamiltonian::new(1.6, 0.8, 0.0).unwrap();
    let cfg = HjbConfig::default();
    let f = SpectralField::from_fn(&g, |x| (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin());
    let init = SpectralField::from_fn(&g, |x| 0.7 * (4.0 * PI * x[1]).cos() - 0.2 * (2.0 * PI * x[0]).sin());
    let a = solve_ergodic(&f, &h, 0.7, &cfg).unwrap();
    let b = solve_ergodic_from(&f, &h, 0.7, &cfg, Some(&init)).unwrap();
    assert!(a.u.max_abs_diff(&b.u) <= 10.0 * cfg.tol);
    assert!((a.lambda - b.lambda).abs() <= 10.0 * cfg.tol);
}

#[test]
fn lambda_monotone_in_data() {
    let g = PeriodicGrid::new(1, 64).unwrap();
    let h = Hamiltonian::quadratic();
    let cfg = HjbConfig::default();
    let f1 = cosine(&g);
    let f2 = f1.add(&SpectralField::from_fn(&g, |x| 0.2 * (1.0 + (4.0 * PI * x[0]).sin())));
    let l1 = solve_ergodic(&f1, &h, 0.8, &cfg).unwrap().lambda;
    let l2 = solve_ergodic(&f2, &h, 0.8, &cfg).unwrap().lambda;
    assert!(l1 <= l2 + cfg.tol);
}

#[test]
fn lambda_within_bounds_across_orders() {
    let g = PeriodicGrid::new(1, 128).unwrap();
    let cfg = HjbConfig::default();
    let f = SpectralField::from_fn(&g, |x| 2.0 * (2.0 * PI * x[0]).sin() + (4.0 * PI * x[0]).cos());
    for (s, gamma) in [(0.6, 1.2), (0.75, 1.5), (0.9, 2.0), (1.0, 2.5)] {
        let h = Hamiltonian::power(gamma).unwrap();
        let sol = solve_ergodic(&f, &h, s, &cfg).unwrap();
        let (lo, hi) = lambda_bounds(&f, &h);
        assert!(lo - cfg.tol <= sol.lambda && sol.lambda <= hi + cfg.tol, "s={s} gamma={gamma}");
        assert!(sol.residual <= cfg.tol);
    }
}
