use std::f64::consts::PI;

use fracmfg::coupling::{LocalCoupling, NonlocalCoupling, OuterMap};
use fracmfg::fokker_planck::{fp_residual, solve_stationary_fp, FpConfig};
use fracmfg::growth::{a_priori_exponents, validate_growth};
use fracmfg::spectral;
use fracmfg::{Hamiltonian, PeriodicGrid, SpectralField, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense `(-Δ)^s` on `n` points from an explicit cosine sum, Nyquist mode
/// excluded.
fn dense_fractional(n: usize, s: f64) -> Vec<Vec<f64>> {
    let half = n as i64 / 2;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = 0.0;
                    for k in (-half + 1)..half {
                        let sym = (2.0 * PI * k.abs() as f64).powf(2.0 * s);
                        acc += sym * (2.0 * PI * k as f64 * (i as f64 - j as f64) / n as f64).cos();
                    }
                    acc / n as f64
                })
                .collect()
        })
        .collect()
}

#[test]
fn dense_operator_matches() {
    let n = 32;
    let g = PeriodicGrid::new(1, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let amps: Vec<(f64, f64)> = (0..10).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let field = SpectralField::from_fn(&g, |x| {
        amps.iter()
            .enumerate()
            .map(|(k, (a, b))| a * (2.0 * PI * k as f64 * x[0]).cos() + b * (2.0 * PI * k as f64 * x[0]).sin())
            .sum()
    });
    for s in [0.6, 0.75, 1.0] {
        let dense = dense_fractional(n, s);
        let scale = (PI * n as f64).powf(2.0 * s);
        let direct: Vec<f64> = dense.iter().map(|row| row.iter().zip(field.values()).map(|(a, b)| a * b).sum()).collect();
        let fast = spectral::fractional_laplacian(&field, s).unwrap();
        for (a, b) in direct.iter().zip(fast.values()) {
            assert!((a - b).abs() <= 1e-12 * scale, "s={s}: {a} vs {b}");
        }
        // column by column from delta impulses
        for j in 0..n {
            let mut delta = vec![0.0; n];
            delta[j] = 1.0;
            let col = spectral::fractional_laplacian(&SpectralField::new(&g, delta).unwrap(), s).unwrap();
            for i in 0..n {
                assert!((col.values()[i] - dense[i][j]).abs() <= 1e-12 * scale);
            }
        }
    }
}

#[test]
fn classical_endpoint_matches_second_difference_spectrum() {
    let g = PeriodicGrid::new(2, 16).unwrap();
    let f = SpectralField::from_fn(&g, |x| (2.0 * PI * (x[0] + 2.0 * x[1])).sin() + (6.0 * PI * x[1]).cos());
    let lap = spectral::fractional_laplacian(&f, 1.0).unwrap();
    let div_grad = spectral::divergence(&spectral::gradient(&f)).scale(-1.0);
    assert!(lap.max_abs_diff(&div_grad) <= 1e-12 * lap.sup_norm());
}

fn fp_suite(dim: usize, n: usize) -> Vec<VectorField> {
    let g = PeriodicGrid::new(dim, n).unwrap();
    if dim == 1 {
        vec![
            VectorField::zeros(&g),
            VectorField::from_fn(&g, |_| [2.0, 0.0, 0.0]),
            // b = -W' with W = cos 2πx
            VectorField::from_fn(&g, |x| [2.0 * PI * (2.0 * PI * x[0]).sin(), 0.0, 0.0]),
        ]
    } else {
        vec![VectorField::from_fn(&g, |x| {
            [
                1.5 * (2.0 * PI * x[1]).sin() + 0.5 * (2.0 * PI * x[0]).cos(),
                -(2.0 * PI * x[0]).cos() + 0.7 * (4.0 * PI * x[1]).sin(),
                0.0,
            ]
        })]
    }
}

#[test]
fn fokker_planck_drift_suite() {
    let cfg = FpConfig::default();
    for (dim, n) in [(1, 128), (2, 128)] {
        for b in fp_suite(dim, n) {
            assert!(b.sup_norm() <= 2.0 * PI + 1e-12);
            let sol = solve_stationary_fp(&b, 0.75, &cfg).unwrap();
            assert_eq!(sol.m.coeffs()[0].re, 1.0);
            assert!(fp_residual(&sol.m, &b, 0.75) <= 1e-8);
            assert!(sol.min_m > 0.0);
        }
    }
}

#[test]
fn gibbs_limit() {
    let g = PeriodicGrid::new(1, 256).unwrap();
    let w = SpectralField::from_fn(&g, |x| (2.0 * PI * x[0]).cos());
    let gibbs_raw = w.map(|v| (-v).exp());
    let gibbs = gibbs_raw.scale(1.0 / gibbs_raw.quadrature_mean());
    let b = VectorField::from_fn(&g, |x| [2.0 * PI * (2.0 * PI * x[0]).sin(), 0.0, 0.0]);
    let cfg = FpConfig::default();
    let mut prev = f64::INFINITY;
    let mut last = 0.0;
    for s in [0.8, 0.9, 0.95, 0.99] {
        let m = solve_stationary_fp(&b, s, &cfg).unwrap().m;
        let d = m.max_abs_diff(&gibbs);
        assert!(d < prev, "distance not decreasing at s = {s}: {d} >= {prev}");
        prev = d;
        last = d;
    }
    assert!(last <= 5e-2, "{last}");
    // at s = 1 the Gibbs density is the solution
    let m1 = solve_stationary_fp(&b, 1.0, &cfg).unwrap().m;
    assert!(m1.max_abs_diff(&gibbs) <= 1e-8);
}

#[test]
fn exponent_examples() {
    let e = a_priori_exponents(0.75, 2.0, 1.5, 1, 1.5).unwrap();
    assert!((e.r_p - 1.2).abs() <= 1e-12);
    assert!((e.theta - 0.5).abs() <= 1e-12);
    assert!((e.delta - 1.0).abs() <= 1e-12);
}

#[test]
fn exponent_identity_over_regime() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 100 {
        let dim = rng.random_range(1..=3);
        let s = rng.random_range(0.51..0.99);
        let gamma = rng.random_range(1.01..2.0);
        let q = rng.random_range(1.01..3.0);
        if !validate_growth(s, gamma, q, dim).passed() {
            continue;
        }
        let e = a_priori_exponents(s, gamma, q, dim, 2.0).unwrap();
        let gp = gamma / (gamma - 1.0);
        let lhs = (1.0 - e.theta / gamma) * gp / e.theta;
        assert!((lhs - (1.0 + e.delta) * q).abs() <= 1e-12 * lhs.abs().max(1.0));
        assert!(e.delta > 0.0);
        checked += 1;
    }
}

#[test]
fn fenchel_young_and_envelope_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    for _ in 0..10_000 {
        let gamma = rng.random_range(1.2..3.5);
        let coeff = rng.random_range(0.2..2.0);
        let h = Hamiltonian::new(gamma, coeff, 0.0).unwrap();
        let p: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let q: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let m = rng.random_range(0.01..3.0);
        let w: Vec<f64> = q.iter().map(|x| -x * m).collect();
        let r = h.legendre_residual(&p, m, &w);
        let scale = 1.0 + m * (h.eval(&p) + h.eval_l(&q));
        if r < -1e-10 * scale {
            violations += 1;
        }
        let cl = h.envelope_constant();
        let t = q.iter().map(|x| x * x).sum::<f64>().sqrt().powf(h.conjugate_exponent());
        let l = h.eval_l(&q);
        if l < cl * t - 1.0 / cl - 1e-10 * (1.0 + l) || l > (t + 1.0) / cl + 1e-10 * (1.0 + l) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn legendre_residual_vanishes_at_optimal_flux() {
    let h = Hamiltonian::quadratic();
    let p = [0.3, -1.2];
    let m = 0.7;
    let w: Vec<f64> = p.iter().map(|x| -m * x).collect();
    assert!(h.legendre_residual(&p, m, &w).abs() <= 1e-12);
}

#[test]
fn gradient_matches_finite_differences() {
    let h = Hamiltonian::new(1.5, 1.0 / 1.5, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let grad = h.grad(&p);
        for d in 0..3 {
            let step = 1e-6;
            let mut a = p.clone();
            let mut b = p.clone();
            a[d] += step;
            b[d] -= step;
            let fd = (h.eval(&a) - h.eval(&b)) / (2.0 * step);
            assert!((fd - grad[d]).abs() <= 1e-6);
        }
    }
}

#[test]
fn conjugate_matches_grid_maximization() {
    let h = Hamiltonian::power(3.0).unwrap();
    let q = 2.0;
    let best = (0..=400_000)
        .map(|i| {
            let p = i as f64 * 1e-5;
            p * q - h.eval(&[p])
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let closed = 2f64.powf(1.5) * 2.0 / 3.0;
    assert!((h.eval_l(&[q]) - closed).abs() <= 1e-12);
    assert!((best - closed).abs() <= 1e-8);
}

#[test]
fn nonlocal_convolution_matches_direct_sum() {
    let n = 32;
    let g = PeriodicGrid::new(1, n).unwrap();
    let kernel = NonlocalCoupling::gaussian_kernel(&g, 0.05).unwrap();
    let f = NonlocalCoupling::new(kernel.clone(), OuterMap::Affine { slope: 1.0, offset: 0.0 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = SpectralField::new(&g, (0..n).map(|_| rng.random_range(0.1..2.0)).collect()).unwrap();
    let fast = f.eval_nonlocal(&m).unwrap();
    for i in 0..n {
        let direct: f64 = (0..n).map(|j| kernel.values()[(i + n - j) % n] * m.values()[j]).sum::<f64>() / n as f64;
        assert!((fast.values()[i] - direct).abs() <= 1e-10);
    }
}

#[test]
fn mollified_coupling_converges_as_width_shrinks() {
    let g = PeriodicGrid::new(1, 256).unwrap();
    let f = LocalCoupling::new(1.0, 1.5).unwrap();
    let m = SpectralField::from_fn(&g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).sin());
    let exact = f.eval_local(&m).unwrap();
    let mut prev = f64::INFINITY;
    for k in 2..8 {
        let eps = 2f64.powi(-k);
        let d = f.mollified_coupling(&m, eps).unwrap().max_abs_diff(&exact);
        assert!(d < prev);
        prev = d;
    }
}
