//! Deterministic initial-data constructors: periodized Gaussian wave
//! packets for the condensate and Gaussian pair profiles for the pair
//! excitation. Randomized ensembles are built on top by drawing the
//! parameters, not by new kernels.
//!
//! Periodization is an explicit image sum, so every constructor is exactly
//! periodic on the torus and admits a closed-form free-evolution oracle
//! (one dispersive Gaussian per image). Momenta live on the frequency
//! lattice 2*pi*m/L, which keeps the phase factor single-valued.

use num_complex::Complex;

use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::kernel::{Kernel, KernelSymmetry};
use crate::scalar::{cis, Scalar};

/// Images summed on each side when periodizing an envelope.
const IMAGES: i64 = 4;

fn check_width<T: Scalar>(grid: &Grid<T>, width: T, what: &'static str) -> Result<()> {
    if !(width > T::zero()) {
        return Err(CoreError::InvalidArgument {
            what,
            detail: "width must be positive".into(),
        });
    }
    if width < T::of(2.0) * grid.h() {
        return Err(CoreError::ResolutionGuard {
            scaled_step: (grid.h() / width).as_f64(),
            limit: 0.5,
            minimal_n: (T::of(2.0) * grid.edge() / width).as_f64().ceil() as usize,
        });
    }
    Ok(())
}

fn check_dim_args<T: Scalar>(
    grid: &Grid<T>,
    center: &[T],
    momentum_index: &[i64],
) -> Result<()> {
    if center.len() != grid.dim() || momentum_index.len() != grid.dim() {
        return Err(CoreError::ShapeMismatch { what: "per-axis parameter lists" });
    }
    Ok(())
}

/// Image-summed Gaussian envelope along one axis, sampled on the lattice:
/// sum_j exp(-(x - c + j*period)^2 / (4 w^2)).
fn axis_envelope<T: Scalar>(grid: &Grid<T>, center: T, width: T, period: T, len: usize) -> Vec<T> {
    let quarter = T::one() / (T::of(4.0) * width * width);
    let step = grid.h();
    (0..len)
        .map(|i| {
            let x = T::of(i as f64) * step - center;
            let mut s = T::zero();
            for j in -IMAGES..=IMAGES {
                let u = x + T::of(j as f64) * period;
                s += (-u * u * quarter).exp();
            }
            s
        })
        .collect()
}

/// Normalized periodic Gaussian packet
///
///   phi(x) ~ e^{i p.x} sum_j exp(-|x - c + jL|^2 / (4 w^2)),
///
/// with p = 2*pi*m/L from `momentum_index`, rescaled to unit L^2 norm.
pub fn gaussian_packet<T: Scalar>(
    grid: &Grid<T>,
    center: &[T],
    momentum_index: &[i64],
    width: T,
) -> Result<Field<T>> {
    check_dim_args(grid, center, momentum_index)?;
    check_width(grid, width, "packet width")?;
    let n = grid.n();
    let d = grid.dim();
    let step = grid.h();
    // Per-axis complex tables: envelope times lattice phase.
    let tables: Vec<Vec<Complex<T>>> = (0..d)
        .map(|a| {
            let env = axis_envelope(grid, center[a], width, grid.edge(), n);
            let p = T::of(momentum_index[a] as f64) * T::two_pi() / grid.edge();
            env.iter()
                .enumerate()
                .map(|(i, &e)| cis(p * T::of(i as f64) * step) * e)
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; d];
    let mut f = Field::from_fn(grid, |_| Complex::new(T::zero(), T::zero()));
    for (flat, z) in f.data_mut().iter_mut().enumerate() {
        grid.decompose(flat, d, &mut idx);
        let mut v = Complex::new(T::one(), T::zero());
        for a in 0..d {
            v *= tables[a][idx[a]];
        }
        *z = v;
    }
    let norm = f.norm();
    if norm == T::zero() {
        return Err(CoreError::InvalidArgument {
            what: "packet",
            detail: "zero field after periodization".into(),
        });
    }
    f.scale(Complex::new(T::one() / norm, T::zero()));
    Ok(f)
}

/// Symmetric Gaussian pair profile
///
///   k(x,y) = amp e^{i p.(x+y)} G_cm((x+y)/2 - c) G_rel(x - y),
///
/// with both factors periodized by image sums (the center-of-mass factor
/// has period L/2, the relative factor period L), so k is torus-periodic
/// in each argument and exactly symmetric under x <-> y.
pub fn gaussian_pair_profile<T: Scalar>(
    grid: &Grid<T>,
    amplitude: T,
    center: &[T],
    cm_momentum_index: &[i64],
    cm_width: T,
    rel_width: T,
) -> Result<Kernel<T>> {
    check_dim_args(grid, center, cm_momentum_index)?;
    check_width(grid, cm_width, "center-of-mass width")?;
    check_width(grid, rel_width, "relative width")?;
    if amplitude == T::zero() {
        return Err(CoreError::InvalidArgument {
            what: "pair profile",
            detail: "amplitude must be nonzero".into(),
        });
    }
    let n = grid.n();
    let d = grid.dim();
    let step = grid.h();
    let half_edge = grid.edge() / T::of(2.0);
    // Per-axis tables indexed by the sums s = xi + yi in 0..2n-1 and the
    // shifted differences r = xi - yi + (n-1) in 0..2n-1.
    let cm_tables: Vec<Vec<Complex<T>>> = (0..d)
        .map(|a| {
            let quarter = T::one() / (T::of(4.0) * cm_width * cm_width);
            let p = T::of(cm_momentum_index[a] as f64) * T::two_pi() / grid.edge();
            (0..2 * n - 1)
                .map(|s| {
                    let u0 = T::of(s as f64) * step / T::of(2.0) - center[a];
                    let mut env = T::zero();
                    for j in -2 * IMAGES..=2 * IMAGES {
                        let u = u0 + T::of(j as f64) * half_edge;
                        env += (-u * u * quarter).exp();
                    }
                    cis(p * T::of(s as f64) * step) * env
                })
                .collect()
        })
        .collect();
    let rel_tables: Vec<Vec<T>> = (0..d)
        .map(|_| {
            let quarter = T::one() / (T::of(4.0) * rel_width * rel_width);
            (0..2 * n - 1)
                .map(|r| {
                    let v0 = T::of(r as f64 - (n as f64 - 1.0)) * step;
                    let mut env = T::zero();
                    for j in -IMAGES..=IMAGES {
                        let v = v0 + T::of(j as f64) * grid.edge();
                        env += (-v * v * quarter).exp();
                    }
                    env
                })
                .collect()
        })
        .collect();
    let p = grid.points();
    let mut xi = vec![0usize; d];
    let mut yi = vec![0usize; d];
    let mut k = Kernel::zero(grid, KernelSymmetry::None);
    let amp = Complex::new(amplitude, T::zero());
    for x in 0..p {
        grid.decompose(x, d, &mut xi);
        for y in 0..p {
            grid.decompose(y, d, &mut yi);
            let mut v = amp;
            for a in 0..d {
                let s = xi[a] + yi[a];
                let r = xi[a] + (n - 1) - yi[a];
                v *= cm_tables[a][s] * rel_tables[a][r];
            }
            k.data_mut()[x * p + y] = v;
        }
    }
    k.retag(KernelSymmetry::Symmetric)?;
    Ok(k)
}
