//! One-particle complex field on a periodic grid.
//!
//! A field owns its samples in row-major order and carries a grid handle so
//! every norm and inner product applies the h^d quadrature weight without
//! the caller having to remember it.

use num_complex::Complex;

use crate::error::{CoreError, Result};
use crate::grid::Grid;
use crate::scalar::{abs2, cis, Scalar};

#[derive(Clone, Debug)]
pub struct Field<T: Scalar> {
    grid: Grid<T>,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> Field<T> {
    pub fn zero(grid: &Grid<T>) -> Self {
        let data = vec![Complex::new(T::zero(), T::zero()); grid.points()];
        Field { grid: grid.clone(), data }
    }

    /// Sample a function of the coordinate vector (length = grid dim).
    pub fn from_fn(grid: &Grid<T>, mut f: impl FnMut(&[T]) -> Complex<T>) -> Self {
        let d = grid.dim();
        let mut idx = [0usize; 3];
        let mut x = [T::zero(); 3];
        let data = (0..grid.points())
            .map(|flat| {
                grid.decompose(flat, d, &mut idx[..d]);
                for a in 0..d {
                    x[a] = grid.coord(idx[a]);
                }
                f(&x[..d])
            })
            .collect();
        Field { grid: grid.clone(), data }
    }

    pub fn from_data(grid: &Grid<T>, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != grid.points() {
            return Err(CoreError::ShapeMismatch { what: "field sample count vs grid" });
        }
        Ok(Field { grid: grid.clone(), data })
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Weighted squared L2 norm, h^d sum |f|^2.
    pub fn norm_sq(&self) -> T {
        let mut s = T::zero();
        for z in &self.data {
            s += abs2(*z);
        }
        s * self.grid.weight()
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Weighted L^q norm for finite q >= 1.
    pub fn lq_norm(&self, q: T) -> Result<T> {
        if q < T::one() {
            return Err(CoreError::InvalidArgument {
                what: "Lebesgue exponent",
                detail: format!("q = {}, want q >= 1", q.as_f64()),
            });
        }
        let mut s = T::zero();
        for z in &self.data {
            s += abs2(*z).powf(q / T::of(2.0));
        }
        Ok((s * self.grid.weight()).powf(T::one() / q))
    }

    /// Weighted L^1 norm.
    pub fn l1_norm(&self) -> T {
        let mut s = T::zero();
        for z in &self.data {
            s += abs2(*z).sqrt();
        }
        s * self.grid.weight()
    }

    pub fn sup_norm(&self) -> T {
        let mut m = T::zero();
        for z in &self.data {
            let a = abs2(*z).sqrt();
            if a > m {
                m = a;
            }
        }
        m
    }

    /// Weighted inner product, h^d sum conj(self) * other.
    pub fn inner(&self, other: &Field<T>) -> Complex<T> {
        debug_assert_eq!(self.grid, other.grid);
        let mut s = Complex::new(T::zero(), T::zero());
        for (a, b) in self.data.iter().zip(&other.data) {
            s += a.conj() * b;
        }
        s.scale(self.grid.weight())
    }

    pub fn scale(&mut self, c: Complex<T>) {
        for z in &mut self.data {
            *z *= c;
        }
    }

    pub fn axpy(&mut self, c: Complex<T>, other: &Field<T>) {
        debug_assert_eq!(self.grid, other.grid);
        for (z, w) in self.data.iter_mut().zip(&other.data) {
            *z += c * w;
        }
    }

    pub fn conj_in_place(&mut self) {
        for z in &mut self.data {
            *z = z.conj();
        }
    }

    pub fn conj(&self) -> Field<T> {
        let mut out = self.clone();
        out.conj_in_place();
        out
    }

    /// Forward spectrum (unnormalized coefficients).
    pub fn spectrum(&self) -> Vec<Complex<T>> {
        let mut hat = self.data.clone();
        self.grid.fft_all(&mut hat, self.grid.dim(), true);
        hat
    }

    /// Multiply the spectrum by a flat-index symbol, in place.
    pub fn filter_spectrum(&mut self, mut symbol: impl FnMut(usize) -> Complex<T>) {
        let d = self.grid.dim();
        let grid = self.grid.clone();
        grid.fft_all(&mut self.data, d, true);
        for (flat, z) in self.data.iter_mut().enumerate() {
            *z *= symbol(flat);
        }
        grid.fft_all(&mut self.data, d, false);
    }

    /// Exact free evolution by time `t`: spectrum multiplied by
    /// exp(-i t |k|^2). Unitary to roundoff.
    pub fn free_propagate(&mut self, t: T) {
        let grid = self.grid.clone();
        self.filter_spectrum(|flat| cis(-t * grid.freq_sq(flat)));
    }

    /// Fraction of the mass h^d |f|^2 sitting within L/4 of the periodic
    /// seam along any axis. Wrap monitor for traveling packets.
    pub fn boundary_mass_fraction(&self) -> T {
        let total = self.norm_sq();
        if total == T::zero() {
            return T::zero();
        }
        let d = self.grid.dim();
        let edge = self.grid.edge();
        let quarter = edge / T::of(4.0);
        let mut idx = [0usize; 3];
        let mut near = T::zero();
        for (flat, z) in self.data.iter().enumerate() {
            self.grid.decompose(flat, d, &mut idx[..d]);
            let mut seam = false;
            for a in 0..d {
                let x = self.grid.coord(idx[a]);
                let dist = if x < edge - x { x } else { edge - x };
                if dist <= quarter {
                    seam = true;
                    break;
                }
            }
            if seam {
                near += abs2(*z);
            }
        }
        near * self.grid.weight() / total
    }
}
