//! Two-point kernels K(x, y) on a periodic grid.
//!
//! Layout is a dense row-major P x P matrix with P = n^d: flat index
//! `x * P + y`. Composition carries the quadrature weight,
//!
//!   (A o B)(x, y) = h^d sum_z A(x, z) B(z, y),
//!
//! so kernel algebra matches the continuum operator algebra and traces,
//! singular values, and spectra all come out in operator normalization.
//!
//! Spectral transforms reuse the grid axis engine: a kernel is a hypercube
//! with 2d axes, rows are axes 0..d and columns are axes d..2d.

use std::any::TypeId;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::scalar::{abs2, Scalar};
use crate::tol;

/// Structural symmetry a kernel is expected to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelSymmetry {
    /// No structure assumed.
    None,
    /// K(x, y) = K(y, x); the pairing kernel lives here.
    Symmetric,
    /// K(x, y) = conj(K(y, x)); one-particle density kernels live here.
    Hermitian,
}

#[derive(Clone, Debug)]
pub struct Kernel<T: Scalar> {
    grid: Grid<T>,
    sym: KernelSymmetry,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> Kernel<T> {
    pub fn zero(grid: &Grid<T>, sym: KernelSymmetry) -> Self {
        let p = grid.points();
        Kernel { grid: grid.clone(), sym, data: vec![Complex::new(T::zero(), T::zero()); p * p] }
    }

    /// Sample from flat index pairs.
    pub fn from_fn(
        grid: &Grid<T>,
        sym: KernelSymmetry,
        mut f: impl FnMut(usize, usize) -> Complex<T>,
    ) -> Self {
        let p = grid.points();
        let mut data = Vec::with_capacity(p * p);
        for x in 0..p {
            for y in 0..p {
                data.push(f(x, y));
            }
        }
        Kernel { grid: grid.clone(), sym, data }
    }

    pub fn from_data(grid: &Grid<T>, sym: KernelSymmetry, data: Vec<Complex<T>>) -> Result<Self> {
        let p = grid.points();
        if data.len() != p * p {
            return Err(CoreError::ShapeMismatch { what: "kernel entry count vs grid" });
        }
        Ok(Kernel { grid: grid.clone(), sym, data })
    }

    /// Rank-one kernel a(x) b(y). Callers retag when a symmetry is known.
    pub fn outer(a: &Field<T>, b: &Field<T>) -> Self {
        debug_assert_eq!(a.grid(), b.grid());
        let p = a.len();
        let mut data = Vec::with_capacity(p * p);
        for x in 0..p {
            let ax = a.data()[x];
            for y in 0..p {
                data.push(ax * b.data()[y]);
            }
        }
        Kernel { grid: a.grid().clone(), sym: KernelSymmetry::None, data }
    }

    /// Kernel of the multiplication operator f -> v f: diagonal v(x) / h^d,
    /// so that composing with it multiplies pointwise.
    pub fn multiplication(v: &Field<T>) -> Self {
        let p = v.len();
        let inv_w = T::one() / v.grid().weight();
        let mut k = Kernel::zero(v.grid(), KernelSymmetry::None);
        for x in 0..p {
            k.data[x * p + x] = v.data()[x].scale(inv_w);
        }
        k
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn sym(&self) -> KernelSymmetry {
        self.sym
    }

    /// Number of lattice points per slot (the matrix is rows x rows).
    #[inline]
    pub fn rows(&self) -> usize {
        self.grid.points()
    }

    #[inline]
    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Complex<T> {
        self.data[x * self.rows() + y]
    }

    /// Relabel the expected symmetry without checking. Prefer `retag`.
    pub fn tag_unchecked(&mut self, sym: KernelSymmetry) {
        self.sym = sym;
    }

    /// Relabel and verify the defect is within tolerance.
    pub fn retag(&mut self, sym: KernelSymmetry) -> Result<()> {
        self.sym = sym;
        self.validate()
    }

    /// Sup-norm symmetry defect relative to the kernel scale; zero for the
    /// untagged case.
    pub fn symmetry_defect(&self) -> T {
        let p = self.rows();
        let mut worst = T::zero();
        match self.sym {
            KernelSymmetry::None => return T::zero(),
            KernelSymmetry::Symmetric => {
                for x in 0..p {
                    for y in (x + 1)..p {
                        let d = cnorm(self.data[x * p + y] - self.data[y * p + x]);
                        if d > worst {
                            worst = d;
                        }
                    }
                }
            }
            KernelSymmetry::Hermitian => {
                for x in 0..p {
                    for y in x..p {
                        let d = cnorm(self.data[x * p + y] - self.data[y * p + x].conj());
                        if d > worst {
                            worst = d;
                        }
                    }
                }
            }
        }
        let scale = self.sup_norm().max(T::one());
        worst / scale
    }

    /// Check the declared symmetry within the shared tolerance.
    pub fn validate(&self) -> Result<()> {
        let defect = self.symmetry_defect();
        let tolerance = T::of(tol::SYMMETRY);
        if defect > tolerance {
            return Err(CoreError::SymmetryDefect {
                tag: match self.sym {
                    KernelSymmetry::None => "none",
                    KernelSymmetry::Symmetric => "symmetric",
                    KernelSymmetry::Hermitian => "hermitian",
                },
                defect: defect.as_f64(),
                tol: tol::SYMMETRY,
            });
        }
        Ok(())
    }

    pub fn conj(&self) -> Kernel<T> {
        let mut out = self.clone();
        for z in &mut out.data {
            *z = z.conj();
        }
        out
    }

    pub fn transpose(&self) -> Kernel<T> {
        let p = self.rows();
        let mut out = Kernel::zero(&self.grid, self.sym);
        for x in 0..p {
            for y in 0..p {
                out.data[y * p + x] = self.data[x * p + y];
            }
        }
        out
    }

    pub fn adjoint(&self) -> Kernel<T> {
        let p = self.rows();
        let mut out = Kernel::zero(&self.grid, self.sym);
        for x in 0..p {
            for y in 0..p {
                out.data[y * p + x] = self.data[x * p + y].conj();
            }
        }
        out
    }

    /// Weighted composition (self o other)(x, y) = h^d sum_z self(x, z)
    /// other(z, y). The result carries no symmetry tag.
    pub fn compose(&self, other: &Kernel<T>) -> Kernel<T> {
        self.compose_conj(false, other, false)
    }

    /// Composition with optional elementwise conjugation of either factor
    /// (no transpose involved); saves materializing conjugate copies.
    pub fn compose_conj(&self, conj_a: bool, other: &Kernel<T>, conj_b: bool) -> Kernel<T> {
        debug_assert_eq!(self.grid, other.grid);
        let p = self.rows();
        let mut out = Kernel::zero(&self.grid, KernelSymmetry::None);
        gemm_into(
            p,
            p,
            p,
            Complex::new(self.grid.weight(), T::zero()),
            &self.data,
            conj_a,
            &other.data,
            conj_b,
            Complex::new(T::zero(), T::zero()),
            &mut out.data,
        );
        out
    }

    /// Apply to a field: (K f)(x) = h^d sum_y K(x, y) f(y).
    pub fn apply(&self, f: &Field<T>) -> Field<T> {
        debug_assert_eq!(&self.grid, f.grid());
        let p = self.rows();
        let w = self.grid.weight();
        let mut out = Field::zero(&self.grid);
        for x in 0..p {
            let row = &self.data[x * p..(x + 1) * p];
            let mut acc = Complex::new(T::zero(), T::zero());
            for (k, v) in row.iter().zip(f.data()) {
                acc += k * v;
            }
            out.data_mut()[x] = acc.scale(w);
        }
        out
    }

    /// Weighted trace h^d sum_x K(x, x).
    pub fn trace(&self) -> Complex<T> {
        let p = self.rows();
        let mut s = Complex::new(T::zero(), T::zero());
        for x in 0..p {
            s += self.data[x * p + x];
        }
        s.scale(self.grid.weight())
    }

    /// Trace of a composition without forming it:
    /// h^{2d} sum_{x,y} self(x, y) other(y, x).
    pub fn trace_compose(&self, other: &Kernel<T>) -> Complex<T> {
        debug_assert_eq!(self.grid, other.grid);
        let p = self.rows();
        let mut s = Complex::new(T::zero(), T::zero());
        for x in 0..p {
            for y in 0..p {
                s += self.data[x * p + y] * other.data[y * p + x];
            }
        }
        let w = self.grid.weight();
        s.scale(w * w)
    }

    pub fn diagonal(&self) -> Field<T> {
        let p = self.rows();
        let mut out = Field::zero(&self.grid);
        for x in 0..p {
            out.data_mut()[x] = self.data[x * p + x];
        }
        out
    }

    /// L2(dx dy) norm, weight h^{2d}.
    pub fn hs_norm(&self) -> T {
        let mut s = T::zero();
        for z in &self.data {
            s += abs2(*z);
        }
        let w = self.grid.weight();
        (s * w * w).sqrt()
    }

    pub fn sup_norm(&self) -> T {
        let mut m = T::zero();
        for z in &self.data {
            let a = cnorm(*z);
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn scale(&mut self, c: Complex<T>) {
        for z in &mut self.data {
            *z *= c;
        }
    }

    pub fn axpy(&mut self, c: Complex<T>, other: &Kernel<T>) {
        debug_assert_eq!(self.grid, other.grid);
        for (z, w) in self.data.iter_mut().zip(&other.data) {
            *z += c * w;
        }
    }

    /// K += c a(x) b(y).
    pub fn add_scaled_outer(&mut self, c: Complex<T>, a: &Field<T>, b: &Field<T>) {
        let p = self.rows();
        for x in 0..p {
            let ca = c * a.data()[x];
            let row = &mut self.data[x * p..(x + 1) * p];
            for (z, bv) in row.iter_mut().zip(b.data()) {
                *z += ca * bv;
            }
        }
    }

    /// Multiply row x by f(x).
    pub fn scale_rows(&mut self, f: &[Complex<T>]) {
        let p = self.rows();
        debug_assert_eq!(f.len(), p);
        self.data.par_chunks_mut(p).zip(f.par_iter()).for_each(|(row, &fx)| {
            for z in row {
                *z *= fx;
            }
        });
    }

    /// Multiply column y by f(y).
    pub fn scale_cols(&mut self, f: &[Complex<T>]) {
        let p = self.rows();
        debug_assert_eq!(f.len(), p);
        self.data.par_chunks_mut(p).for_each(|row| {
            for (z, fy) in row.iter_mut().zip(f) {
                *z *= fy;
            }
        });
    }

    /// Multiply entrywise by a real profile of the periodic difference,
    /// K(x, y) -> v[x - y mod n] K(x, y), with `diff` indexed by the flat
    /// difference multi-index.
    pub fn weight_by_difference(&mut self, diff: &[T]) {
        debug_assert_eq!(diff.len(), self.rows());
        self.map_by_difference(|flat| Complex::new(diff[flat], T::zero()));
    }

    /// Multiply entrywise by a complex table of the periodic difference
    /// (phase factors for split propagators).
    pub fn phase_by_difference(&mut self, table: &[Complex<T>]) {
        debug_assert_eq!(table.len(), self.rows());
        self.map_by_difference(|flat| table[flat]);
    }

    fn map_by_difference(&mut self, f: impl Fn(usize) -> Complex<T> + Sync) {
        let p = self.rows();
        let d = self.grid.dim();
        let n = self.grid.n();
        let grid = self.grid.clone();
        self.data.par_chunks_mut(p).enumerate().for_each(|(x, row)| {
            let mut xi = [0usize; 3];
            let mut yi = [0usize; 3];
            grid.decompose(x, d, &mut xi[..d]);
            for (y, z) in row.iter_mut().enumerate() {
                grid.decompose(y, d, &mut yi[..d]);
                let mut flat = 0usize;
                for a in 0..d {
                    flat = flat * n + (xi[a] + n - yi[a]) % n;
                }
                *z *= f(flat);
            }
        });
    }

    /// FFT over the row (x) axes.
    pub fn fft_rows(&mut self, forward: bool) {
        let d = self.grid.dim();
        let axes: Vec<usize> = (0..d).collect();
        let grid = self.grid.clone();
        grid.fft_axes(&mut self.data, 2 * d, &axes, forward);
    }

    /// FFT over the column (y) axes.
    pub fn fft_cols(&mut self, forward: bool) {
        let d = self.grid.dim();
        let axes: Vec<usize> = (d..2 * d).collect();
        let grid = self.grid.clone();
        grid.fft_axes(&mut self.data, 2 * d, &axes, forward);
    }

    /// FFT over all 2d axes.
    pub fn fft_both(&mut self, forward: bool) {
        let d = self.grid.dim();
        let grid = self.grid.clone();
        grid.fft_all(&mut self.data, 2 * d, forward);
    }

    /// Reindex to the sheared frame S(w, y) = K(w + y, y) (sum per axis,
    /// mod n). Exact permutation of entries.
    pub fn shear(&self) -> Kernel<T> {
        self.shear_signed(true)
    }

    /// Undo `shear`: K(x, y) = S(x - y, y).
    pub fn unshear(&self) -> Kernel<T> {
        self.shear_signed(false)
    }

    fn shear_signed(&self, forward: bool) -> Kernel<T> {
        let p = self.rows();
        let d = self.grid.dim();
        let n = self.grid.n();
        let mut out = Kernel::zero(&self.grid, KernelSymmetry::None);
        let mut wi = [0usize; 3];
        let mut yi = [0usize; 3];
        for w in 0..p {
            self.grid.decompose(w, d, &mut wi[..d]);
            for y in 0..p {
                self.grid.decompose(y, d, &mut yi[..d]);
                let mut x = 0usize;
                for a in 0..d {
                    x = x * n + (wi[a] + yi[a]) % n;
                }
                if forward {
                    out.data[w * p + y] = self.data[x * p + y];
                } else {
                    out.data[x * p + y] = self.data[w * p + y];
                }
            }
        }
        out
    }

    /// Most negative eigenvalue of the weighted operator f -> h^d K f,
    /// assuming a Hermitian kernel. Nonnegative spectra return a value
    /// >= 0 up to roundoff. Dense decomposition up to `DENSE_EIG_MAX`
    /// points, Lanczos with full reorthogonalization beyond.
    pub fn min_eigenvalue(&self) -> T {
        self.min_eigenvalue_with(DENSE_EIG_MAX)
    }

    pub(crate) fn min_eigenvalue_with(&self, dense_cap: usize) -> T {
        let p = self.rows();
        let w = self.grid.weight();
        if p <= dense_cap {
            let m = nalgebra::DMatrix::from_fn(p, p, |r, c| self.data[r * p + c].scale(w));
            let eig = nalgebra::linalg::SymmetricEigen::new(m);
            let mut min = T::zero();
            let mut first = true;
            for &l in eig.eigenvalues.iter() {
                if first || l < min {
                    min = l;
                    first = false;
                }
            }
            min
        } else {
            lanczos_min_eig(p, LANCZOS_ITERS.min(p), |v, out| {
                for x in 0..p {
                    let row = &self.data[x * p..(x + 1) * p];
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for (k, f) in row.iter().zip(v) {
                        acc += k * f;
                    }
                    out[x] = acc.scale(w);
                }
            })
        }
    }

    /// Error if the Hermitian operator dips below -tol * max(trace, 1).
    pub fn check_psd(&self) -> Result<()> {
        let min_eig = self.min_eigenvalue();
        let scale = self.trace().re.max(T::one());
        let floor = -T::of(tol::PSD_SCALE) * scale;
        if min_eig < floor {
            return Err(CoreError::PsdDefect {
                min_eig: min_eig.as_f64(),
                tol: (tol::PSD_SCALE * scale.as_f64()),
            });
        }
        Ok(())
    }

    /// Operator singular value decomposition: returns (sigma_k, u_k, v_k)
    /// with K(x, y) = sum_k sigma_k u_k(x) conj(v_k(y)), u and v orthonormal
    /// in the weighted L2 inner product, sigma sorted descending. At most
    /// `max_rank` triples are returned when given.
    pub fn svd(&self, max_rank: Option<usize>) -> (Vec<T>, Vec<Field<T>>, Vec<Field<T>>) {
        let p = self.rows();
        let m = nalgebra::DMatrix::from_fn(p, p, |r, c| self.data[r * p + c]);
        let svd = m.svd(true, true);
        let u = svd.u.expect("left vectors requested");
        let vt = svd.v_t.expect("right vectors requested");
        let w = self.grid.weight();
        let back = T::one() / w.sqrt();
        let rank = max_rank.unwrap_or(p).min(p);
        let mut sigmas = Vec::with_capacity(rank);
        let mut left = Vec::with_capacity(rank);
        let mut right = Vec::with_capacity(rank);
        for k in 0..rank {
            sigmas.push(svd.singular_values[k] * w);
            let mut uf = Field::zero(&self.grid);
            let mut vf = Field::zero(&self.grid);
            for x in 0..p {
                uf.data_mut()[x] = u[(x, k)].scale(back);
                vf.data_mut()[x] = vt[(k, x)].conj().scale(back);
            }
            left.push(uf);
            right.push(vf);
        }
        (sigmas, left, right)
    }
}

#[inline]
fn cnorm<T: Scalar>(z: Complex<T>) -> T {
    abs2(z).sqrt()
}

const DENSE_EIG_MAX: usize = 2048;
const LANCZOS_ITERS: usize = 160;

/// c = alpha A B + beta c for row-major square-free shapes
/// (A is m x k, B is k x n, C is m x n), with optional elementwise
/// conjugation of A and B. Dispatches to the packed complex gemm for the
/// two concrete scalars; anything else takes the blocked fallback.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_into<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    alpha: Complex<T>,
    a: &[Complex<T>],
    conj_a: bool,
    b: &[Complex<T>],
    conj_b: bool,
    beta: Complex<T>,
    c: &mut [Complex<T>],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let concrete = TypeId::of::<T>() == TypeId::of::<f64>() || TypeId::of::<T>() == TypeId::of::<f32>();
    if !concrete {
        gemm_fallback(m, k, n, alpha, a, conj_a, b, conj_b, beta, c);
        return;
    }
    // The packed routines take no conjugation flags; materialize conjugated
    // copies up front. O(P^2) memory against the O(P^3) multiply.
    let conj_of = |s: &[Complex<T>]| -> Vec<Complex<T>> { s.iter().map(|z| z.conj()).collect() };
    let ac;
    let a_eff: &[Complex<T>] = if conj_a {
        ac = conj_of(a);
        &ac
    } else {
        a
    };
    let bc;
    let b_eff: &[Complex<T>] = if conj_b {
        bc = conj_of(b);
        &bc
    } else {
        b
    };
    use matrixmultiply::CGemmOption::Standard;
    if TypeId::of::<T>() == TypeId::of::<f64>() {
        // Complex<f64> is repr(C) { re, im }, identical in layout to
        // [f64; 2], which is the element type zgemm expects.
        unsafe {
            matrixmultiply::zgemm(
                Standard,
                Standard,
                m,
                k,
                n,
                [alpha.re.as_f64(), alpha.im.as_f64()],
                a_eff.as_ptr() as *const [f64; 2],
                k as isize,
                1,
                b_eff.as_ptr() as *const [f64; 2],
                n as isize,
                1,
                [beta.re.as_f64(), beta.im.as_f64()],
                c.as_mut_ptr() as *mut [f64; 2],
                n as isize,
                1,
            );
        }
    } else {
        unsafe {
            matrixmultiply::cgemm(
                Standard,
                Standard,
                m,
                k,
                n,
                [alpha.re.as_f64() as f32, alpha.im.as_f64() as f32],
                a_eff.as_ptr() as *const [f32; 2],
                k as isize,
                1,
                b_eff.as_ptr() as *const [f32; 2],
                n as isize,
                1,
                [beta.re.as_f64() as f32, beta.im.as_f64() as f32],
                c.as_mut_ptr() as *mut [f32; 2],
                n as isize,
                1,
            );
        }
    }
}

/// Straightforward i-k-j product; reference path for exotic scalars and for
/// testing the packed dispatch.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_fallback<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    alpha: Complex<T>,
    a: &[Complex<T>],
    conj_a: bool,
    b: &[Complex<T>],
    conj_b: bool,
    beta: Complex<T>,
    c: &mut [Complex<T>],
) {
    for z in c.iter_mut() {
        *z *= beta;
    }
    for i in 0..m {
        for kk in 0..k {
            let mut aik = a[i * k + kk];
            if conj_a {
                aik = aik.conj();
            }
            let coef = alpha * aik;
            let brow = &b[kk * n..(kk + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            if conj_b {
                for (cz, bz) in crow.iter_mut().zip(brow) {
                    *cz += coef * bz.conj();
                }
            } else {
                for (cz, bz) in crow.iter_mut().zip(brow) {
                    *cz += coef * bz;
                }
            }
        }
    }
}

/// Smallest Ritz value of a Hermitian operator from a fully
/// reorthogonalized Lanczos sweep with a fixed deterministic start vector.
fn lanczos_min_eig<T: Scalar>(
    p: usize,
    iters: usize,
    matvec: impl Fn(&[Complex<T>], &mut [Complex<T>]),
) -> T {
    // SplitMix start vector: deterministic and unaligned with lattice
    // symmetries.
    let mut state = 0x5eed_0001_u64;
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        T::of((z >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
    };
    let mut v: Vec<Complex<T>> = (0..p).map(|_| Complex::new(next(), next())).collect();
    let norm = |u: &[Complex<T>]| {
        let mut s = T::zero();
        for z in u {
            s += abs2(*z);
        }
        s.sqrt()
    };
    let nv = norm(&v);
    for z in &mut v {
        *z = z.scale(T::one() / nv);
    }
    let mut basis: Vec<Vec<Complex<T>>> = vec![v.clone()];
    let mut alphas: Vec<T> = Vec::new();
    let mut betas: Vec<T> = Vec::new();
    let mut work = vec![Complex::new(T::zero(), T::zero()); p];
    for j in 0..iters {
        matvec(&basis[j], &mut work);
        let mut alpha = T::zero();
        for (a, b) in basis[j].iter().zip(&work) {
            alpha += (a.conj() * b).re;
        }
        alphas.push(alpha);
        // Subtract projections onto every previous vector, twice, to hold
        // orthogonality at roundoff level.
        for _ in 0..2 {
            for q in &basis {
                let mut proj = Complex::new(T::zero(), T::zero());
                for (a, b) in q.iter().zip(&work) {
                    proj += a.conj() * b;
                }
                for (wz, qz) in work.iter_mut().zip(q) {
                    *wz -= proj * qz;
                }
            }
        }
        let beta = norm(&work);
        if beta < T::of(1e-14) || j + 1 == iters {
            break;
        }
        betas.push(beta);
        let inv = T::one() / beta;
        basis.push(work.iter().map(|z| z.scale(inv)).collect());
    }
    let m = alphas.len();
    let tri = nalgebra::DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alphas[r]
        } else if r + 1 == c || c + 1 == r {
            betas[r.min(c)]
        } else {
            T::zero()
        }
    });
    let eig = nalgebra::linalg::SymmetricEigen::new(tri);
    let mut min = alphas[0];
    for &l in eig.eigenvalues.iter() {
        if l < min {
            min = l;
        }
    }
    min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cis;

    type C = Complex<f64>;

    fn grid(d: usize, n: usize, edge: f64) -> Grid<f64> {
        Grid::new(d, n, edge).unwrap()
    }

    fn pseudo_kernel(g: &Grid<f64>, sym: KernelSymmetry, seed: u64) -> Kernel<f64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut k = Kernel::from_fn(g, KernelSymmetry::None, |_, _| C::new(next(), next()));
        let p = k.rows();
        match sym {
            KernelSymmetry::None => {}
            KernelSymmetry::Symmetric => {
                for x in 0..p {
                    for y in 0..x {
                        k.data[x * p + y] = k.data[y * p + x];
                    }
                }
            }
            KernelSymmetry::Hermitian => {
                for x in 0..p {
                    k.data[x * p + x] = C::new(k.data[x * p + x].re, 0.0);
                    for y in 0..x {
                        k.data[x * p + y] = k.data[y * p + x].conj();
                    }
                }
            }
        }
        k.sym = sym;
        k
    }

    #[test]
    fn compose_matches_quadrature_reference() {
        // Reference: direct h^d-weighted sum, written independently of the
        // gemm path.
        let g = grid(1, 6, 3.0);
        let a = pseudo_kernel(&g, KernelSymmetry::None, 3);
        let b = pseudo_kernel(&g, KernelSymmetry::None, 4);
        let c = a.compose(&b);
        let p = g.points();
        let h = g.weight();
        for x in 0..p {
            for y in 0..p {
                let mut want = C::new(0.0, 0.0);
                for z in 0..p {
                    want += a.at(x, z) * b.at(z, y);
                }
                want *= h;
                assert!((c.at(x, y) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gemm_dispatch_agrees_with_fallback() {
        let g = grid(2, 4, 2.0);
        let a = pseudo_kernel(&g, KernelSymmetry::None, 5);
        let b = pseudo_kernel(&g, KernelSymmetry::None, 6);
        let p = g.points();
        for (ca, cb) in [(false, false), (true, false), (false, true), (true, true)] {
            let mut fast = vec![C::new(0.0, 0.0); p * p];
            let mut slow = vec![C::new(0.0, 0.0); p * p];
            let alpha = C::new(0.7, -0.2);
            let beta = C::new(0.0, 0.0);
            gemm_into(p, p, p, alpha, a.data(), ca, b.data(), cb, beta, &mut fast);
            gemm_fallback(p, p, p, alpha, a.data(), ca, b.data(), cb, beta, &mut slow);
            let err = fast
                .iter()
                .zip(&slow)
                .map(|(u, v)| (u - v).norm())
                .fold(0.0f64, f64::max);
            assert!(err < 1e-11, "conj flags ({ca},{cb}): defect {err:.3e}");
        }
    }

    #[test]
    fn multiplication_kernel_acts_pointwise() {
        let g = grid(1, 8, 4.0);
        let v = Field::from_fn(&g, |x| C::new(x[0], 0.5));
        let f = Field::from_fn(&g, |x| cis(x[0]));
        let k = Kernel::multiplication(&v);
        let kf = k.apply(&f);
        for i in 0..g.points() {
            let want = v.data()[i] * f.data()[i];
            assert!((kf.data()[i] - want).norm() < 1e-12);
        }
        // Composition with a multiplication kernel multiplies rows.
        let a = pseudo_kernel(&g, KernelSymmetry::None, 9);
        let ka = k.compose(&a);
        for x in 0..g.points() {
            for y in 0..g.points() {
                assert!((ka.at(x, y) - v.data()[x] * a.at(x, y)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetry_defect_and_validate() {
        let g = grid(1, 6, 2.0);
        let mut k = pseudo_kernel(&g, KernelSymmetry::Hermitian, 12);
        assert!(k.symmetry_defect() < 1e-15);
        assert!(k.validate().is_ok());
        k.data_mut()[1] += C::new(1e-3, 0.0);
        assert!(k.validate().is_err());
        let mut s = pseudo_kernel(&g, KernelSymmetry::Symmetric, 13);
        assert!(s.validate().is_ok());
        s.data_mut()[2] += C::new(0.0, 1e-3);
        assert!(s.validate().is_err());
    }

    #[test]
    fn adjoint_transpose_conj_consistency() {
        let g = grid(1, 6, 2.0);
        let k = pseudo_kernel(&g, KernelSymmetry::None, 21);
        let via_two = k.transpose().conj();
        let adj = k.adjoint();
        for (a, b) in adj.data().iter().zip(via_two.data()) {
            assert_eq!(a, b);
        }
        // Hermitian kernel equals its adjoint exactly by construction.
        let h = pseudo_kernel(&g, KernelSymmetry::Hermitian, 22);
        for (a, b) in h.data().iter().zip(h.adjoint().data()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn trace_and_trace_compose() {
        let g = grid(1, 6, 3.0);
        let a = pseudo_kernel(&g, KernelSymmetry::None, 31);
        let b = pseudo_kernel(&g, KernelSymmetry::None, 32);
        let direct = a.compose(&b).trace();
        let fused = a.trace_compose(&b);
        assert!((direct - fused).norm() < 1e-12);
    }

    #[test]
    fn shear_is_a_permutation_with_exact_inverse() {
        let g = grid(2, 4, 2.0);
        let k = pseudo_kernel(&g, KernelSymmetry::None, 41);
        let sheared = k.shear();
        let back = sheared.unshear();
        for (a, b) in k.data().iter().zip(back.data()) {
            assert_eq!(a, b);
        }
        // Sorted magnitudes agree: entries are only moved, never mixed.
        let mut m1: Vec<f64> = k.data().iter().map(|z| z.norm()).collect();
        let mut m2: Vec<f64> = sheared.data().iter().map(|z| z.norm()).collect();
        m1.sort_by(f64::total_cmp);
        m2.sort_by(f64::total_cmp);
        assert_eq!(m1, m2);
    }

    #[test]
    fn shear_pins_difference_coordinate() {
        // K(x, y) = f(x - y) shears to S(w, y) = f(w), constant along y.
        let g = grid(1, 8, 8.0);
        let k = Kernel::from_fn(&g, KernelSymmetry::None, |x, y| {
            let w = (x + 8 - y) % 8;
            C::new(w as f64, 0.0)
        });
        let s = k.shear();
        let p = g.points();
        for w in 0..p {
            for y in 0..p {
                assert_eq!(s.at(w, y), C::new(w as f64, 0.0));
            }
        }
    }

    #[test]
    fn weight_by_difference_matches_direct_loop() {
        let g = grid(2, 4, 2.0);
        let n = g.n();
        let mut k = pseudo_kernel(&g, KernelSymmetry::None, 51);
        let orig = k.clone();
        let diff: Vec<f64> = (0..g.points()).map(|i| 0.1 * i as f64 - 0.3).collect();
        k.weight_by_difference(&diff);
        let mut xi = [0usize; 3];
        let mut yi = [0usize; 3];
        for x in 0..g.points() {
            g.decompose(x, 2, &mut xi[..2]);
            for y in 0..g.points() {
                g.decompose(y, 2, &mut yi[..2]);
                let flat = ((xi[0] + n - yi[0]) % n) * n + (xi[1] + n - yi[1]) % n;
                let want = orig.at(x, y) * diff[flat];
                assert!((k.at(x, y) - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn psd_check_accepts_gram_and_flags_negative() {
        let g = grid(1, 8, 4.0);
        let a = pseudo_kernel(&g, KernelSymmetry::None, 61);
        // A o A^dagger is PSD by construction.
        let mut gram = a.compose(&a.adjoint());
        gram.tag_unchecked(KernelSymmetry::Hermitian);
        assert!(gram.validate().is_ok());
        assert!(gram.check_psd().is_ok());
        assert!(gram.min_eigenvalue() > -1e-12);
        // Push one diagonal entry down far enough to break positivity.
        let bump = gram.trace().re * 2.0 / g.weight();
        gram.data_mut()[0] -= C::new(bump, 0.0);
        assert!(gram.check_psd().is_err());
    }

    #[test]
    fn lanczos_agrees_with_dense_minimum() {
        let g = grid(1, 24, 4.0);
        let a = pseudo_kernel(&g, KernelSymmetry::None, 71);
        let mut h = a.compose(&a.adjoint());
        // Shift down so the minimum eigenvalue is a known negative target.
        let p = h.rows();
        let shift = 0.37 / g.weight();
        for x in 0..p {
            h.data_mut()[x * p + x] -= C::new(shift, 0.0);
        }
        h.tag_unchecked(KernelSymmetry::Hermitian);
        let dense = h.min_eigenvalue_with(usize::MAX);
        let lanczos = h.min_eigenvalue_with(0);
        assert!(
            (dense - lanczos).abs() < 1e-8 * dense.abs().max(1.0),
            "dense {dense} vs lanczos {lanczos}"
        );
    }

    #[test]
    fn svd_reconstructs_and_orthonormalizes() {
        let g = grid(1, 10, 5.0);
        let k = pseudo_kernel(&g, KernelSymmetry::None, 81);
        let (sigmas, left, right) = k.svd(None);
        // Descending singular values.
        for win in sigmas.windows(2) {
            assert!(win[0] >= win[1] - 1e-14);
        }
        // Weighted orthonormality of both families.
        for i in 0..left.len() {
            for j in 0..left.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((left[i].inner(&left[j]).norm() - want).abs() < 1e-10);
                assert!((right[i].inner(&right[j]).norm() - want).abs() < 1e-10);
            }
        }
        // Reconstruction K(x, y) = sum sigma u(x) conj(v(y)).
        let p = g.points();
        let mut err = 0.0f64;
        for x in 0..p {
            for y in 0..p {
                let mut acc = C::new(0.0, 0.0);
                for k3 in 0..sigmas.len() {
                    acc += left[k3].data()[x] * right[k3].data()[y].conj() * sigmas[k3];
                }
                err = err.max((acc - k.at(x, y)).norm());
            }
        }
        assert!(err < 1e-10, "reconstruction defect {err:.3e}");
    }

    #[test]
    fn svd_of_rank_one_outer() {
        let g = grid(1, 8, 2.0);
        let a = Field::from_fn(&g, |x| C::new(1.0 + x[0], -0.5 * x[0]));
        let b = Field::from_fn(&g, |x| cis(2.0 * x[0]));
        let k = Kernel::outer(&a, &b.conj());
        let (sigmas, _, _) = k.svd(Some(3));
        // K = a(x) conj(b(y)) has operator norm |a| |b| and rank one.
        assert!((sigmas[0] - a.norm() * b.norm()).abs() < 1e-10);
        assert!(sigmas[1] < 1e-12);
    }

    #[test]
    fn apply_matches_row_quadrature() {
        let g = grid(2, 4, 2.0);
        let k = pseudo_kernel(&g, KernelSymmetry::None, 91);
        let f = Field::from_fn(&g, |x| C::new(x[0], x[1]));
        let kf = k.apply(&f);
        let p = g.points();
        for x in 0..p {
            let mut want = C::new(0.0, 0.0);
            for y in 0..p {
                want += k.at(x, y) * f.data()[y];
            }
            want *= g.weight();
            assert!((kf.data()[x] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn row_and_column_transforms_are_independent() {
        let g = grid(1, 8, 3.0);
        let k = pseudo_kernel(&g, KernelSymmetry::None, 101);
        // Row transform then column transform equals the full transform.
        let mut a = k.clone();
        a.fft_rows(true);
        a.fft_cols(true);
        let mut b = k.clone();
        b.fft_both(true);
        for (u, v) in a.data().iter().zip(b.data()) {
            assert!((u - v).norm() < 1e-10);
        }
        // And each one round-trips.
        let mut c = k.clone();
        c.fft_rows(true);
        c.fft_rows(false);
        for (u, v) in c.data().iter().zip(k.data()) {
            assert!((u - v).norm() < 1e-12);
        }
    }
}
