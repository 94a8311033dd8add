use std::f64::consts::PI;

use fracmfg::coupling::{Coupling, LocalCoupling};
use fracmfg::fokker_planck::{solve_div_source, solve_stationary_fp, FpConfig};
use fracmfg::hjb::{solve_ergodic, HjbConfig};
use fracmfg::mfg::{MfgProblem, RegimePolicy, SolverConfig};
use fracmfg::spectral;
use fracmfg::variational::{energy, kinetic_energy, minimize_energy, FlowPair, VariationalConfig};
use fracmfg::{Hamiltonian, PeriodicGrid, SpectralField, VectorField};
use proptest::prelude::*;

fn two_mode(g: &PeriodicGrid, a: f64, b: f64, k: i32) -> SpectralField {
    SpectralField::from_fn(g, |x| a * (2.0 * PI * x[0]).cos() + b * (2.0 * PI * k as f64 * x[0]).sin())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fp_mass_is_exact_and_density_positive(a in -2.0..2.0f64, b in -2.0..2.0f64, k in 1..4i32, s in 0.55..1.0f64) {
        let g = PeriodicGrid::new(1, 128).unwrap();
        let drift = VectorField::new(vec![two_mode(&g, a, b, k)]).unwrap();
        let sol = solve_stationary_fp(&drift, s, &FpConfig::default()).unwrap();
        prop_assert_eq!(sol.m.coeffs()[0].re, 1.0);
        prop_assert!(sol.min_m > 0.0);
    }

    #[test]
    fn fractional_laplacian_is_linear_and_symmetric(a in -1.0..1.0f64, b in -1.0..1.0f64, s in 0.1..1.0f64) {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let f1 = SpectralField::from_fn(&g, |x| (2.0 * PI * x[0]).cos() + a * (4.0 * PI * x[1]).sin());
        let f2 = SpectralField::from_fn(&g, |x| b * (2.0 * PI * (x[0] - x[1])).sin());
        let lhs = spectral::fractional_laplacian(&f1.lincomb(a, &f2, b), s).unwrap();
        let l1 = spectral::fractional_laplacian(&f1, s).unwrap();
        let l2 = spectral::fractional_laplacian(&f2, s).unwrap();
        prop_assert!(lhs.max_abs_diff(&l1.lincomb(a, &l2, b)) <= 1e-10);
        prop_assert!((l1.inner(&f2) - f1.inner(&l2)).abs() <= 1e-10);
    }

    #[test]
    fn hjb_shift_covariance(c in -5.0..5.0f64, a in 0.1..1.5f64) {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let f = two_mode(&g, a, 0.3, 2);
        let h = Hamiltonian::quadratic();
        let cfg = HjbConfig::default();
        let x = solve_ergodic(&f, &h, 0.75, &cfg).unwrap();
        let y = solve_ergodic(&f.add_scalar(c), &h, 0.75, &cfg).unwrap();
        prop_assert!((y.lambda - c - x.lambda).abs() <= 1e-12);
        prop_assert!(x.u.max_abs_diff(&y.u) <= 1e-12);
    }

    #[test]
    fn generated_pairs_satisfy_constraint_and_fenchel_bound(a in -0.5..0.5f64, b in -0.5..0.5f64, s in 0.55..1.0f64) {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let h = Hamiltonian::new(1.7, 0.8, 0.0).unwrap();
        let w = VectorField::new(vec![two_mode(&g, a, b, 3)]).unwrap();
        let pair = FlowPair::from_flux(w, s, &h).unwrap();
        prop_assert!(pair.constraint_residual() <= 1e-12);
        prop_assume!(pair.m.min() > 0.0);
        let u = two_mode(&g, 0.4, -0.2, 2);
        let grad = spectral::gradient(&u);
        let rhs = -grad.inner(&pair.w) - pair.m.inner(&h.eval_field(&grad));
        prop_assert!(pair.kinetic >= rhs - 1e-12);
    }
}

#[test]
fn fenchel_bound_is_tight_at_optimal_flux() {
    let g = PeriodicGrid::new(1, 64).unwrap();
    let h = Hamiltonian::quadratic();
    let m = SpectralField::from_fn(&g, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).sin());
    let u = two_mode(&g, 0.4, -0.2, 2);
    let grad = spectral::gradient(&u);
    let w = h.grad_field(&grad).mul_scalar_field(&m).scale(-1.0);
    let kinetic = kinetic_energy(&m, &w, &h, 1e-10);
    let rhs = -grad.inner(&w) - m.inner(&h.eval_field(&grad));
    assert!((kinetic - rhs).abs() <= 1e-12);
}

#[test]
fn single_mode_energy_matches_fine_quadrature() {
    let s = 0.7;
    let amp = 0.2;
    let g = PeriodicGrid::new(1, 64).unwrap();
    let h = Hamiltonian::quadratic();
    let w = VectorField::from_fn(&g, |x| [amp * (2.0 * PI * x[0]).cos(), 0.0, 0.0]);
    let pair = FlowPair::from_flux(w, s, &h).unwrap();
    let coupling = LocalCoupling::new(1.0, 2.0).unwrap();
    let e = energy(&pair, &h, &coupling).unwrap();
    // closed form m = 1 + A(2π)^{1-2s} sin 2πx, integrand w²/(2m) + m²/2
    let c = amp * (2.0 * PI).powf(1.0 - 2.0 * s);
    let n = 1 << 16;
    let quad: f64 = (0..n)
        .map(|j| {
            let x = (j as f64 + 0.5) / n as f64;
            let m = 1.0 + c * (2.0 * PI * x).sin();
            let w = amp * (2.0 * PI * x).cos();
            w * w / (2.0 * m) + 0.5 * m * m
        })
        .sum::<f64>()
        / n as f64;
    assert!((e - quad).abs() <= 1e-8, "{e} vs {quad}");
    let from_div = solve_div_source(&pair.w.scale(-1.0), s).unwrap();
    assert_eq!(from_div.values(), pair.m.values());
}

#[test]
fn minimization_kinetic_stays_controlled() {
    let g = PeriodicGrid::new(1, 64).unwrap();
    let v = SpectralField::from_fn(&g, |x| 0.2 * (2.0 * PI * x[0]).cos());
    let c = LocalCoupling::new(1.0, 2.0).unwrap().with_potential(v).unwrap();
    let h = Hamiltonian::quadratic();
    let p = MfgProblem::new(0.75, h.clone(), Coupling::Local(c), g, SolverConfig::default(), RegimePolicy::Report).unwrap();
    let sol = minimize_energy(&p, &VariationalConfig::default()).unwrap();
    let cl = h.envelope_constant();
    // every iterate has max m ≥ 1, so this is the tightest form of the bound
    let bound = (sol.energy_history[0] + 2.0 / cl) / cl;
    assert!(sol.kinetic_power_history.iter().all(|&k| k <= bound));
    assert!(sol.energy_history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn homogeneous_coupling_minimizer_is_uniform() {
    let g = PeriodicGrid::new(2, 16).unwrap();
    let c = LocalCoupling::new(1.0, 1.5).unwrap();
    let p = MfgProblem::new(0.8, Hamiltonian::quadratic(), Coupling::Local(c), g.clone(), SolverConfig::default(), RegimePolicy::Report)
        .unwrap();
    let sol = minimize_energy(&p, &VariationalConfig::default()).unwrap();
    assert_eq!(sol.iterations, 0);
    assert!(sol.pair.m.max_abs_diff(&SpectralField::constant(&g, 1.0)) == 0.0);
}
