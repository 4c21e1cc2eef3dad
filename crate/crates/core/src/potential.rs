//! Short-range repulsive interaction on the periodic box.
//!
//! The lattice potential is the scaled profile
//!
//!   V(x) = N^{d beta} amplitude vtilde(N^beta |x|),
//!
//! where |x| is the minimal-image radius and vtilde is the radial profile
//! normalized to unit mass over R^d, so the lattice mass h^d sum V equals
//! `amplitude` for every admissible (N, beta). Construction refuses grids
//! that cannot resolve the scaled core or contain its support.

use num_complex::Complex;

use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::scalar::Scalar;
use crate::tol;

/// Radial interaction profile on [0, 1], nonnegative and nonincreasing,
/// zero beyond the unit radius.
#[derive(Clone, Debug)]
pub enum Profile {
    /// exp(-1/(1 - r^2)) inside the unit ball; smooth and compactly
    /// supported.
    Bump,
    /// Uniform samples on [0, 1], linearly interpolated. Validated at
    /// construction via `checked_table`.
    Table(Vec<f64>),
}

impl Profile {
    /// Validate a sample table: nonnegative and nonincreasing.
    pub fn checked_table(samples: Vec<f64>) -> Result<Profile> {
        if samples.len() < 2 {
            return Err(CoreError::InvalidArgument {
                what: "profile table",
                detail: format!("{} samples, want at least 2", samples.len()),
            });
        }
        let step = 1.0 / (samples.len() - 1) as f64;
        for (j, &v) in samples.iter().enumerate() {
            if v < 0.0 {
                return Err(CoreError::ProfileNegative { at_r: j as f64 * step });
            }
        }
        for (j, w) in samples.windows(2).enumerate() {
            if w[1] > w[0] + 1e-12 * w[0].abs().max(1.0) {
                return Err(CoreError::ProfileNotMonotone { at_r: (j + 1) as f64 * step });
            }
        }
        Ok(Profile::Table(samples))
    }

    /// Profile value at radius r (in profile units; 0 beyond the support).
    pub fn eval(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self {
            Profile::Bump => (-1.0 / (1.0 - r * r)).exp(),
            Profile::Table(samples) => {
                let pos = r * (samples.len() - 1) as f64;
                let j = pos.floor() as usize;
                if j + 1 >= samples.len() {
                    return samples[samples.len() - 1];
                }
                let frac = pos - j as f64;
                samples[j] * (1.0 - frac) + samples[j + 1] * frac
            }
        }
    }

    /// Mass over R^d, |S^{d-1}| int_0^1 v(r) r^{d-1} dr, by composite
    /// Simpson quadrature.
    pub fn mass(&self, dim: usize) -> f64 {
        let sphere = match dim {
            1 => 2.0,
            2 => std::f64::consts::TAU,
            3 => 2.0 * std::f64::consts::TAU,
            _ => unreachable!("grid construction rejects dim > 3"),
        };
        let panels = 4096usize;
        let h = 1.0 / panels as f64;
        let f = |r: f64| self.eval(r) * r.powi(dim as i32 - 1);
        let mut s = f(0.0) + f(1.0);
        for j in 1..panels {
            let w = if j % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(j as f64 * h);
        }
        sphere * s * h / 3.0
    }
}

/// Scaled interaction sampled on the difference lattice, with its spectrum
/// cached for convolutions.
#[derive(Clone, Debug)]
pub struct Potential<T: Scalar> {
    grid: Grid<T>,
    n_particles: f64,
    beta: f64,
    amplitude: f64,
    diff: Vec<T>,
    hat: Vec<Complex<T>>,
}

impl<T: Scalar> Potential<T> {
    pub fn new(
        grid: &Grid<T>,
        profile: &Profile,
        n_particles: f64,
        beta: f64,
        amplitude: f64,
    ) -> Result<Self> {
        if !(n_particles >= 1.0) {
            return Err(CoreError::InvalidArgument {
                what: "particle number",
                detail: format!("N = {n_particles}, want N >= 1"),
            });
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(CoreError::InvalidArgument {
                what: "scaling exponent",
                detail: format!("beta = {beta}, want 0 <= beta <= 1"),
            });
        }
        if !(amplitude > 0.0) {
            return Err(CoreError::InvalidArgument {
                what: "interaction amplitude",
                detail: format!("{amplitude}, want > 0"),
            });
        }
        let d = grid.dim();
        let edge = grid.edge().as_f64();
        let h = grid.h().as_f64();
        let scale = n_particles.powf(beta);
        // Scaled support radius must fit in half the box, else the periodic
        // images overlap.
        let support = 1.0 / scale;
        if support > edge / 2.0 {
            return Err(CoreError::SupportGuard { support, half_box: edge / 2.0 });
        }
        let mass = profile.mass(d);
        let height = scale.powi(d as i32) * amplitude / mass;
        let mut idx = [0usize; 3];
        let diff: Vec<T> = (0..grid.points())
            .map(|flat| {
                grid.decompose(flat, d, &mut idx[..d]);
                let mut r2 = 0.0;
                for a in 0..d {
                    let x = grid.displacement(idx[a]).as_f64();
                    r2 += x * x;
                }
                T::of(height * profile.eval(scale * r2.sqrt()))
            })
            .collect();
        let mut hat: Vec<Complex<T>> =
            diff.iter().map(|&v| Complex::new(v, T::zero())).collect();
        grid.fft_all(&mut hat, d, true);
        let pot = Potential {
            grid: grid.clone(),
            n_particles,
            beta,
            amplitude,
            diff,
            hat,
        };
        // The guard is quantitative: the lattice mass must reproduce the
        // amplitude to within POTENTIAL_MASS. Four lattice points across the
        // scaled support (scale * h <= 1/4) always suffices, but coarser
        // grids are admitted whenever the quadrature still lands inside the
        // budget.
        let rel_err = (pot.lattice_mass().as_f64() - amplitude).abs() / amplitude;
        if rel_err > tol::POTENTIAL_MASS {
            let minimal = (4.0 * edge * scale).ceil() as usize;
            return Err(CoreError::ResolutionGuard {
                scaled_step: scale * h,
                limit: 0.25,
                minimal_n: minimal + minimal % 2,
            });
        }
        Ok(pot)
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn n_particles(&self) -> f64 {
        self.n_particles
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Mean-field prefactor 1/N multiplying pair terms.
    pub fn coupling(&self) -> T {
        T::of(1.0 / self.n_particles)
    }

    /// V at the difference flat index.
    #[inline]
    pub fn value(&self, diff_flat: usize) -> T {
        self.diff[diff_flat]
    }

    /// The full difference table, indexed like a field.
    pub fn diff_table(&self) -> &[T] {
        &self.diff
    }

    /// Discrete mass h^d sum V.
    pub fn lattice_mass(&self) -> T {
        let mut s = T::zero();
        for &v in &self.diff {
            s += v;
        }
        s * self.grid.weight()
    }

    /// Periodic convolution (V * f)(x) = h^d sum_y V(x - y) f(y), via the
    /// cached spectrum.
    pub fn convolve(&self, f: &Field<T>) -> Field<T> {
        debug_assert_eq!(&self.grid, f.grid());
        let d = self.grid.dim();
        let mut data = f.data().to_vec();
        self.grid.fft_all(&mut data, d, true);
        for (z, v) in data.iter_mut().zip(&self.hat) {
            *z *= v;
        }
        self.grid.fft_all(&mut data, d, false);
        let w = self.grid.weight();
        for z in &mut data {
            *z = z.scale(w);
        }
        Field::from_data(&self.grid, data).expect("same grid")
    }
}
