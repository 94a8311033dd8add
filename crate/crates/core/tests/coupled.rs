use std::f64::consts::PI;

use fracmfg::coupling::{Coupling, LocalCoupling};
use fracmfg::mfg::{
    schauder_map, solve_fixed_point, system_residual, uniqueness_probe, MfgProblem, RegimePolicy, SolverConfig,
};
use fracmfg::variational::{duality_gap, minimize_energy, optimality_check, VariationalConfig};
use fracmfg::{Hamiltonian, PeriodicGrid, SpectralField};

fn perturbed(grid: &PeriodicGrid, a: f64, solver: SolverConfig) -> MfgProblem {
    let v = SpectralField::from_fn(grid, |x| a * (2.0 * PI * x[0]).cos());
    let c = LocalCoupling::new(1.0, 2.0).unwrap().with_potential(v).unwrap();
    MfgProblem::new(0.75, Hamiltonian::quadratic(), Coupling::Local(c), grid.clone(), solver, RegimePolicy::Report).unwrap()
}

#[test]
fn uniform_solution_for_several_orders() {
    let g = PeriodicGrid::new(1, 64).unwrap();
    for s in [0.6, 0.75, 0.9] {
        let c = Coupling::Local(LocalCoupling::new(1.0, 2.0).unwrap());
        let p = MfgProblem::new(s, Hamiltonian::quadratic(), c, g.clone(), SolverConfig::default(), RegimePolicy::Report).unwrap();
        let sol = solve_fixed_point(&p).unwrap();
        let r = system_residual(&sol, &p).unwrap();
        assert!(r.hjb <= 1e-10 && r.fp <= 1e-10);
        assert!((sol.lambda - 1.0).abs() <= 1e-12);
        assert!(sol.u.sup_norm() <= 1e-12);
        assert!(sol.m.max_abs_diff(&SpectralField::constant(&g, 1.0)) <= 1e-12);
        assert_eq!(sol.diagnostics.duality_gap, Some(0.0));
    }
}

#[test]
fn perturbed_problem_converges_with_density_dip() {
    let g = PeriodicGrid::new(1, 128).unwrap();
    let p = perturbed(&g, 0.01, SolverConfig::default());
    let sol = solve_fixed_point(&p).unwrap();
    let r = system_residual(&sol, &p).unwrap();
    assert!(r.hjb <= 1e-6 && r.fp <= 1e-6, "{r:?}");
    assert_eq!(sol.m.coeffs()[0].re, 1.0);
    assert!(sol.m.min() > 0.0);
    assert!(sol.diagnostics.sandwich_ok);
    // the potential peaks at x = 0, where congestion pushes density away
    assert_eq!(sol.m.argmin(), 0);
    assert!(optimality_check(&sol, &p.hamiltonian) <= 1e-12);
    let gap = duality_gap(&sol, p.coupling.as_local().unwrap(), &p.hamiltonian);
    assert!(gap <= 1e-4, "gap {gap}");
}

#[test]
fn damping_does_not_change_the_answer() {
    let g = PeriodicGrid::new(1, 64).unwrap();
    let a = solve_fixed_point(&perturbed(&g, 0.05, SolverConfig::default())).unwrap();
    let b = solve_fixed_point(&perturbed(&g, 0.05, SolverConfig { damping: 1.0, ..SolverConfig::default() })).unwrap();
    let tol = SolverConfig::default().tol_outer;
    assert!((a.lambda - b.lambda).abs() <= 10.0 * tol);
    assert!(a.m.max_abs_diff(&b.m) <= 10.0 * tol);
}

#[test]
fn schauder_map_is_continuous_and_mass_preserving() {
    let g = PeriodicGrid::new(1, 64).unwrap();
    let c = LocalCoupling::new(1.0, 2.0).unwrap().with_saturation(3.0).unwrap();
    let p = MfgProblem::new(0.7, Hamiltonian::quadratic(), Coupling::Local(c), g.clone(), SolverConfig::default(), RegimePolicy::Report)
        .unwrap();
    let m1 = SpectralField::from_fn(&g, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).cos());
    let m2 = m1.add(&SpectralField::from_fn(&g, |x| 1e-6 * (4.0 * PI * x[0]).sin()));
    let t1 = schauder_map(&p, &m1, 0.0).unwrap();
    let t2 = schauder_map(&p, &m2, 0.0).unwrap();
    assert_eq!(t1.mu.coeffs()[0].re, 1.0);
    assert!(t1.mu.min() > 0.0);
    assert!(t1.mu.max_abs_diff(&t2.mu) <= 1e-4);
}

#[test]
fn uniqueness_across_seeds() {
    let g = PeriodicGrid::new(1, 64).unwrap();
    let p = perturbed(&g, 0.02, SolverConfig::default());
    let seeds = [
        SpectralField::constant(&g, 1.0),
        SpectralField::from_fn(&g, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).cos()),
    ];
    let report = uniqueness_probe(&p, &seeds);
    assert!(report.monotone && report.seeds.iter().all(|s| s.converged));
    assert!(report.max_m_distance <= 1e-6, "{report:?}");
    assert!(report.max_lambda_distance <= 1e-8, "{report:?}");
}

#[test]
fn aggregation_is_flagged() {
    let g = PeriodicGrid::new(1, 32).unwrap();
    let c = LocalCoupling::new(-0.1, 2.0).unwrap();
    let p = MfgProblem::new(0.8, Hamiltonian::quadratic(), Coupling::Local(c), g.clone(), SolverConfig::default(), RegimePolicy::Report)
        .unwrap();
    let report = uniqueness_probe(&p, &[SpectralField::constant(&g, 1.0)]);
    assert!(!report.monotone);
    assert!(report.flags.iter().any(|f| f == "monotonicity hypothesis not met"));
}

#[test]
fn variational_route_agrees_with_fixed_point() {
    let g = PeriodicGrid::new(1, 128).unwrap();
    let p = perturbed(&g, 0.01, SolverConfig::default());
    let fixed = solve_fixed_point(&p).unwrap();
    let var = minimize_energy(&p, &VariationalConfig::default()).unwrap();
    assert!(var.pair.m.max_abs_diff(&fixed.m) <= 1e-3);
    assert!((var.lambda - fixed.lambda).abs() <= 1e-3);
    let as_sol = var.to_mfg_solution(&p).unwrap();
    assert!(optimality_check(&as_sol, &p.hamiltonian) <= 1e-4);
    assert!(var.energy_history.windows(2).all(|w| w[1] <= w[0]));
}
