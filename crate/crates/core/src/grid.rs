//! Uniform periodic grids on the unit torus and the n-dimensional FFT
//! driving every spectral operator.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::spectral::SpectralError;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

struct GridData {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Integer wavenumber of each flat index, unused axes are zero.
    modes: Vec<[i64; MAX_DIM]>,
}

/// The torus `[0,1)^dim` sampled at `n` points per axis.
///
/// Values are stored row-major with the last axis varying fastest. Cloning is
/// cheap: FFT plans and the wavenumber table are shared.
#[derive(Clone)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
    data: Arc<GridData>,
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

impl Eq for PeriodicGrid {}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .finish()
    }
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self, SpectralError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(SpectralError::InvalidParameter(format!(
                "grid dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if n < 2 || n % 2 != 0 {
            return Err(SpectralError::InvalidParameter(format!(
                "points per dimension must be a positive even integer, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        let total = n.pow(dim as u32);
        let mut modes = Vec::with_capacity(total);
        for flat in 0..total {
            let mut k = [0i64; MAX_DIM];
            let mut rem = flat;
            for axis in (0..dim).rev() {
                let j = rem % n;
                rem /= n;
                k[axis] = wavenumber(j, n);
            }
            modes.push(k);
        }
        Ok(Self {
            dim,
            n,
            data: Arc::new(GridData {
                forward,
                inverse,
                modes,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points, `n^dim`.
    pub fn len(&self) -> usize {
        self.data.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Multi-index of a flat position.
    pub fn index(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    /// Physical coordinates `j/n` of a flat position; unused axes are zero.
    pub fn coords(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.index(flat);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = idx[axis] as f64 / self.n as f64;
        }
        x
    }

    /// Integer wavenumber in `{-n/2, ..., n/2-1}` per axis.
    pub fn mode(&self, flat: usize) -> [i64; MAX_DIM] {
        self.data.modes[flat]
    }

    /// True when some axis sits on the unmatched mode `-n/2`.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let half = (self.n / 2) as i64;
        self.data.modes[flat][..self.dim]
            .iter()
            .any(|&k| k == -half)
    }

    /// `|k|^2` as an integer.
    pub fn mode_norm_sq(&self, flat: usize) -> i64 {
        self.data.modes[flat].iter().map(|k| k * k).sum()
    }

    /// `2π|k|`, the frequency of the plane wave at a flat position.
    pub fn frequency(&self, flat: usize) -> f64 {
        2.0 * std::f64::consts::PI * (self.mode_norm_sq(flat) as f64).sqrt()
    }

    /// Whether a mode survives the 2/3 truncation rule.
    pub fn is_resolved_for_products(&self, flat: usize) -> bool {
        let n = self.n as i64;
        self.data.modes[flat][..self.dim]
            .iter()
            .all(|&k| 3 * k.abs() <= n)
    }

    /// Forward transform normalized so that coefficient 0 is the mean.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.len());
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.data.forward);
        let scale = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Inverse transform returning the real part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.len());
        let mut buf = coeffs.to_vec();
        self.transform(&mut buf, &self.data.inverse);
        buf.into_iter().map(|c| c.re).collect()
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // last axis is contiguous
        plan.process_with_scratch(buf, &mut scratch);
        if self.dim == 1 {
            return;
        }
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.dim - 1 {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..buf.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = buf[start + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        buf[start + j * stride] = *v;
                    }
                }
            }
        }
    }
}

fn wavenumber(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}
