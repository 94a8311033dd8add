//! Small dense-vector iterative solvers shared by the PDE modules.

use std::collections::VecDeque;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Anderson mixing for `x = g(x)` (type II, with mixing parameter `beta`).
///
/// With depth 0 this is the damped Picard update `x + beta·(g(x) - x)`.
#[derive(Debug, Clone)]
pub struct AndersonMixer {
    depth: usize,
    beta: f64,
    prev: Option<(Vec<f64>, Vec<f64>)>,
    dx: VecDeque<Vec<f64>>,
    df: VecDeque<Vec<f64>>,
}

impl AndersonMixer {
    pub fn new(depth: usize, beta: f64) -> Self {
        Self {
            depth,
            beta,
            prev: None,
            dx: VecDeque::with_capacity(depth),
            df: VecDeque::with_capacity(depth),
        }
    }

    pub fn reset(&mut self) {
        self.prev = None;
        self.dx.clear();
        self.df.clear();
    }

    /// Next iterate from the current `x` and its image `gx = g(x)`.
    pub fn step(&mut self, x: &[f64], gx: &[f64]) -> Vec<f64> {
        let f: Vec<f64> = gx.iter().zip(x).map(|(a, b)| a - b).collect();
        if self.depth > 0 {
            if let Some((px, pf)) = self.prev.take() {
                if self.dx.len() == self.depth {
                    self.dx.pop_front();
                    self.df.pop_front();
                }
                self.dx.push_back(x.iter().zip(&px).map(|(a, b)| a - b).collect());
                self.df.push_back(f.iter().zip(&pf).map(|(a, b)| a - b).collect());
            }
            self.prev = Some((x.to_vec(), f.clone()));
        }
        let mut next: Vec<f64> = x.iter().zip(&f).map(|(a, b)| a + self.beta * b).collect();
        if self.dx.is_empty() {
            return next;
        }
        let gamma = match least_squares(&self.df, &f) {
            Some(g) => g,
            None => {
                self.dx.clear();
                self.df.clear();
                return next;
            }
        };
        for ((g, dx), df) in gamma.iter().zip(&self.dx).zip(&self.df) {
            for ((n, a), b) in next.iter_mut().zip(dx).zip(df) {
                *n -= g * (a + self.beta * b);
            }
        }
        next
    }
}

/// `argmin_γ ‖f - Σ γ_j cols_j‖` via regularized normal equations.
fn least_squares(cols: &VecDeque<Vec<f64>>, f: &[f64]) -> Option<Vec<f64>> {
    let k = cols.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    let mut trace = 0.0;
    for i in 0..k {
        for j in 0..=i {
            let v = dot(&cols[i], &cols[j]);
            a[i][j] = v;
            a[j][i] = v;
        }
        trace += a[i][i];
        a[i][k] = dot(&cols[i], f);
    }
    if !(trace > 0.0) {
        return None;
    }
    let reg = 1e-13 * trace;
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += reg;
    }
    solve_dense(a)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = a.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for row in col + 1..k {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for c in col..=k {
                    a[row][c] -= factor * a[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let mut acc = a[row][k];
        for c in row + 1..k {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b - A x‖ / ‖b‖` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Restarted GMRES with right preconditioning for `A x = b`, from `x = 0`.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rel_tol: f64,
    restart: usize,
    max_iter: usize,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return GmresOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut total = 0;
    let mut rel = 1.0;
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let beta = norm2(&r);
        rel = beta / bnorm;
        if rel <= rel_tol {
            return GmresOutcome {
                x,
                iterations: total,
                relative_residual: rel,
                converged: true,
            };
        }
        let m = restart.min(max_iter - total);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            let z = precondition(&basis[j]);
            let mut w = apply(&z);
            zs.push(z);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][j] = hij;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= hij * b);
            }
            // one pass of reorthogonalization
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                h[i][j] += c;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
            let wn = norm2(&w);
            h[j + 1][j] = wn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if denom == 0.0 {
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            rel = g[j + 1].abs() / bnorm;
            if rel <= rel_tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution on the triangular system
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut acc = g[i];
            for k in i + 1..used {
                acc -= h[i][k] * y[k];
            }
            y[i] = acc / h[i][i];
        }
        for (yi, z) in y.iter().zip(&zs) {
            x.iter_mut().zip(z).for_each(|(a, b)| *a += yi * b);
        }
        if used == 0 {
            break;
        }
    }
    let ax = apply(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    let final_rel = norm2(&r) / bnorm;
    GmresOutcome {
        converged: final_rel <= rel_tol.max(rel),
        x,
        iterations: total,
        relative_residual: final_rel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anderson_solves_linear_fixed_point() {
        // x = B x + c with a non-contractive rotation-like B
        let b = [[0.0, 1.6], [-1.6, 0.0]];
        let c = [1.0, 2.0];
        let g = |x: &[f64]| vec![b[0][0] * x[0] + b[0][1] * x[1] + c[0], b[1][0] * x[0] + b[1][1] * x[1] + c[1]];
        let mut mixer = AndersonMixer::new(3, 0.5);
        let mut x = vec![0.0, 0.0];
        for _ in 0..50 {
            let gx = g(&x);
            x = mixer.step(&x, &gx);
        }
        let gx = g(&x);
        assert!((gx[0] - x[0]).abs() < 1e-10 && (gx[1] - x[1]).abs() < 1e-10);
    }

    #[test]
    fn gmres_matches_direct_solve() {
        let a = [[4.0, 1.0, 0.5], [0.2, 3.0, -1.0], [0.0, 1.5, 2.0]];
        let apply = |x: &[f64]| (0..3).map(|i| (0..3).map(|j| a[i][j] * x[j]).sum()).collect();
        let rhs = [1.0, -2.0, 0.5];
        let out = gmres(&apply, |v: &[f64]| v.to_vec(), &rhs, 1e-14, 2, 50);
        assert!(out.converged);
        let ax: Vec<f64> = apply(&out.x);
        for (l, r) in ax.iter().zip(&rhs) {
            assert!((l - r).abs() < 1e-12);
        }
    }
}
