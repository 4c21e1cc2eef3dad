//! Periodic grid on the box [0, L)^d with spectral frequency bookkeeping.
//!
//! Conventions, fixed once for the whole crate:
//! - points x_i = i h with h = L/n, index row-major with the last axis
//!   contiguous;
//! - frequencies k_m = 2 pi m / L with m in [-n/2, n/2), stored in FFT
//!   order (0, 1, .., n/2-1, -n/2, .., -1);
//! - forward transforms are unnormalized sums, the inverse carries 1/n per
//!   axis, and every physical-space norm carries the quadrature weight h^d
//!   explicitly.
//!
//! The same axis engine transforms fields (d axes) and two-point kernels
//! (2d axes of equal length), so there is exactly one strided-FFT code path
//! to trust.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

struct GridRepr<T: Scalar> {
    dim: usize,
    n: usize,
    edge: T,
    freqs: Vec<T>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

/// Cheap handle to a shared grid description (clone = reference bump).
pub struct Grid<T: Scalar>(Arc<GridRepr<T>>);

impl<T: Scalar> Clone for Grid<T> {
    fn clone(&self) -> Self {
        Grid(Arc::clone(&self.0))
    }
}

impl<T: Scalar> std::fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Grid(d={}, n={}, L={})",
            self.0.dim,
            self.0.n,
            self.0.edge.as_f64()
        )
    }
}

impl<T: Scalar> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.0.dim == other.0.dim && self.0.n == other.0.n && self.0.edge == other.0.edge
    }
}

impl<T: Scalar> Grid<T> {
    /// Build a grid; `dim` in 1..=3, even `n >= 4`, finite `edge > 0`.
    pub fn new(dim: usize, n: usize, edge: T) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(CoreError::InvalidGrid { detail: format!("dim = {dim}, want 1..=3") });
        }
        if n < 4 || n % 2 != 0 {
            return Err(CoreError::InvalidGrid { detail: format!("n = {n}, want even n >= 4") });
        }
        if !(edge > T::zero()) || !edge.is_finite() {
            return Err(CoreError::InvalidGrid {
                detail: format!("edge length L = {}, want finite L > 0", edge.as_f64()),
            });
        }
        let two_pi = T::two_pi();
        let freqs = (0..n)
            .map(|i| {
                let m = if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
                two_pi * T::of(m as f64) / edge
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Grid(Arc::new(GridRepr { dim, n, edge, freqs, fwd, inv })))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.0.n
    }

    /// Box edge length L.
    #[inline]
    pub fn edge(&self) -> T {
        self.0.edge
    }

    /// Lattice spacing h = L/n.
    #[inline]
    pub fn h(&self) -> T {
        self.0.edge / T::of(self.0.n as f64)
    }

    /// Number of lattice points n^d.
    #[inline]
    pub fn points(&self) -> usize {
        self.0.n.pow(self.0.dim as u32)
    }

    /// Quadrature weight h^d for physical-space sums.
    #[inline]
    pub fn weight(&self) -> T {
        let mut w = T::one();
        for _ in 0..self.0.dim {
            w *= self.h();
        }
        w
    }

    /// Axis frequency for index `i` (FFT order).
    #[inline]
    pub fn freq(&self, i: usize) -> T {
        self.0.freqs[i]
    }

    /// Largest axis frequency magnitude, pi n / L.
    pub fn freq_max(&self) -> T {
        T::pi() * T::of(self.0.n as f64) / self.0.edge
    }

    /// Axis coordinate x_i = i h.
    #[inline]
    pub fn coord(&self, i: usize) -> T {
        T::of(i as f64) * self.h()
    }

    /// Minimal-image displacement for an index difference, in [-L/2, L/2).
    #[inline]
    pub fn displacement(&self, i: usize) -> T {
        let n = self.0.n;
        let shifted = (i + n / 2) % n;
        T::of(shifted as f64 - (n / 2) as f64) * self.h()
    }

    /// Decompose a flat index (row-major, `naxes` axes of length n).
    #[inline]
    pub fn decompose(&self, mut flat: usize, naxes: usize, out: &mut [usize]) {
        let n = self.0.n;
        for a in (0..naxes).rev() {
            out[a] = flat % n;
            flat /= n;
        }
    }

    /// Squared frequency magnitude |k|^2 at a flat field index.
    pub fn freq_sq(&self, flat: usize) -> T {
        let mut idx = [0usize; 3];
        self.decompose(flat, self.0.dim, &mut idx[..self.0.dim]);
        let mut s = T::zero();
        for a in 0..self.0.dim {
            let k = self.0.freqs[idx[a]];
            s += k * k;
        }
        s
    }

    /// Spectral Laplacian symbol -|k|^2 over the field lattice.
    pub fn laplacian_symbol(&self) -> Vec<T> {
        (0..self.points()).map(|i| -self.freq_sq(i)).collect()
    }

    /// Fractional symbol |k|^s; `s = 0` is the identity weight, `s < 0` is
    /// rejected.
    pub fn fractional_symbol(&self, s: T) -> Result<Vec<T>> {
        if s < T::zero() {
            return Err(CoreError::InvalidArgument {
                what: "fractional exponent",
                detail: format!("s = {}, want s >= 0", s.as_f64()),
            });
        }
        if s == T::zero() {
            return Ok(vec![T::one(); self.points()]);
        }
        let half = s / T::of(2.0);
        Ok((0..self.points()).map(|i| self.freq_sq(i).powf(half)).collect())
    }

    /// In-place FFT along `axes` of a row-major hypercube with `naxes` axes
    /// of length n. Forward is unnormalized; inverse divides by n per axis.
    pub fn fft_axes(&self, data: &mut [Complex<T>], naxes: usize, axes: &[usize], forward: bool) {
        let n = self.0.n;
        debug_assert_eq!(data.len(), n.pow(naxes as u32), "hypercube size");
        let plan = if forward { &self.0.fwd } else { &self.0.inv };
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
        let mut line = vec![Complex::new(T::zero(), T::zero()); n];
        for &axis in axes {
            debug_assert!(axis < naxes);
            let stride = n.pow((naxes - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
            } else {
                let block = stride * n;
                for base in (0..data.len()).step_by(block) {
                    for off in 0..stride {
                        let start = base + off;
                        for (j, slot) in line.iter_mut().enumerate() {
                            *slot = data[start + j * stride];
                        }
                        plan.process_with_scratch(&mut line, &mut scratch);
                        for (j, value) in line.iter().enumerate() {
                            data[start + j * stride] = *value;
                        }
                    }
                }
            }
        }
        if !forward {
            let scale = T::one() / T::of(n as f64).powi(axes.len() as i32);
            for z in data.iter_mut() {
                *z = z.scale(scale);
            }
        }
    }

    /// Full transform over all `naxes` axes.
    pub fn fft_all(&self, data: &mut [Complex<T>], naxes: usize, forward: bool) {
        let axes: Vec<usize> = (0..naxes).collect();
        self.fft_axes(data, naxes, &axes, forward);
    }
}
