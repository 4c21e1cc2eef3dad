//! The coupled state (phi, Lambda, Gamma) and its construction from
//! condensate plus pair-excitation data.
//!
//! Given a symmetric pair kernel k, the hyperbolic series
//!
//!   sh(k) = sum_j k o (conj(k) o k)^j / (2j+1)!
//!
//! generates the correlated parts:
//!
//!   Gamma  = conj(phi) x phi + (1/N)  conj(sh(k)) o sh(k),
//!   Lambda = phi x phi       + (1/2N) sh(2k),
//!
//! which makes Gamma Hermitian PSD and Lambda symmetric by construction,
//! and gives the particle-number identity
//! tr Gamma = |phi|^2_{L2} + (1/N) |sh(k)|^2_{L2(dxdy)}.

use num_complex::Complex;

use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::kernel::{Kernel, KernelSymmetry};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct HfbState<T: Scalar> {
    pub time: T,
    pub phi: Field<T>,
    pub lambda: Kernel<T>,
    pub gamma: Kernel<T>,
    pub n_particles: f64,
    pub beta: f64,
}

impl<T: Scalar> HfbState<T> {
    /// Pure condensate: Lambda = phi x phi, Gamma = conj(phi) x phi,
    /// no pair excitation.
    pub fn pure_condensate(phi: Field<T>, n_particles: f64, beta: f64) -> Result<Self> {
        let mut lambda = Kernel::outer(&phi, &phi);
        lambda.tag_unchecked(KernelSymmetry::Symmetric);
        let mut gamma = Kernel::outer(&phi.conj(), &phi);
        gamma.tag_unchecked(KernelSymmetry::Hermitian);
        let s = HfbState { time: T::zero(), phi, lambda, gamma, n_particles, beta };
        s.validate()?;
        Ok(s)
    }

    /// Build from condensate and pair excitation k (symmetric kernel).
    /// With `normalize`, phi is rescaled so that tr Gamma = 1; this fails
    /// when the pair part alone already carries mass >= 1.
    pub fn from_pair_excitation(
        phi: Field<T>,
        k: &Kernel<T>,
        n_particles: f64,
        beta: f64,
        normalize: bool,
    ) -> Result<Self> {
        if k.sym() != KernelSymmetry::Symmetric {
            return Err(CoreError::InvalidArgument {
                what: "pair excitation kernel",
                detail: "symmetry tag must be symmetric".into(),
            });
        }
        k.validate()?;
        let sh = sinh_series(k)?;
        let mut two_k = k.clone();
        two_k.scale(Complex::new(T::of(2.0), T::zero()));
        let sh2 = sinh_series(&two_k)?;
        let inv_n = T::of(1.0 / n_particles);

        let pair_mass = {
            let m = sh.hs_norm();
            (m * m * inv_n).as_f64()
        };
        let mut phi = phi;
        if normalize {
            if pair_mass >= 1.0 {
                return Err(CoreError::NotNormalizable { pair_mass });
            }
            let target = T::of(1.0 - pair_mass).sqrt();
            let cur = phi.norm();
            if cur == T::zero() {
                return Err(CoreError::InvalidArgument {
                    what: "condensate",
                    detail: "cannot normalize a zero field".into(),
                });
            }
            phi.scale(Complex::new(target / cur, T::zero()));
        }

        // Gamma = conj(phi) x phi + (1/N) conj(sh) o sh.
        let mut gamma = sh.compose_conj(true, &sh, false);
        gamma.scale(Complex::new(inv_n, T::zero()));
        gamma.add_scaled_outer(Complex::new(T::one(), T::zero()), &phi.conj(), &phi);
        gamma.tag_unchecked(KernelSymmetry::Hermitian);

        // Lambda = phi x phi + (1/2N) sh(2k).
        let mut lambda = sh2;
        lambda.scale(Complex::new(inv_n / T::of(2.0), T::zero()));
        lambda.add_scaled_outer(Complex::new(T::one(), T::zero()), &phi, &phi);
        lambda.tag_unchecked(KernelSymmetry::Symmetric);

        let s = HfbState { time: T::zero(), phi, lambda, gamma, n_particles, beta };
        s.validate()?;
        Ok(s)
    }

    pub fn grid(&self) -> &Grid<T> {
        self.phi.grid()
    }

    /// Mean-field prefactor 1/N.
    pub fn coupling(&self) -> T {
        T::of(1.0 / self.n_particles)
    }

    /// Symmetry tags, grid agreement, and positivity of Gamma.
    pub fn validate(&self) -> Result<()> {
        if self.phi.grid() != self.lambda.grid() || self.phi.grid() != self.gamma.grid() {
            return Err(CoreError::ShapeMismatch { what: "state component grids" });
        }
        if self.lambda.sym() != KernelSymmetry::Symmetric {
            return Err(CoreError::InvalidArgument {
                what: "state",
                detail: "pair kernel must carry the symmetric tag".into(),
            });
        }
        if self.gamma.sym() != KernelSymmetry::Hermitian {
            return Err(CoreError::InvalidArgument {
                what: "state",
                detail: "density kernel must carry the hermitian tag".into(),
            });
        }
        self.lambda.validate()?;
        self.gamma.validate()?;
        self.gamma.check_psd()?;
        Ok(())
    }
}

/// The series sum_j k o (conj(k) o k)^j / (2j+1)!, truncated when a term
/// drops below roundoff relative to the running sum.
pub fn sinh_series<T: Scalar>(k: &Kernel<T>) -> Result<Kernel<T>> {
    let square = k.compose_conj(true, k, false); // conj(k) o k
    let mut term = k.clone();
    let mut sum = k.clone();
    let max_terms = 48usize;
    for j in 1..=max_terms {
        // term_j = term_{j-1} o square / ((2j)(2j+1)).
        term = term.compose(&square);
        let denom = T::of((2 * j) as f64 * (2 * j + 1) as f64);
        term.scale(Complex::new(T::one() / denom, T::zero()));
        let t_norm = term.hs_norm();
        let s_norm = sum.hs_norm();
        sum.axpy(Complex::new(T::one(), T::zero()), &term);
        if t_norm <= T::of(1e-16) * s_norm.max(T::one()) {
            let mut out = sum;
            out.tag_unchecked(KernelSymmetry::Symmetric);
            return Ok(out);
        }
        if t_norm > T::of(1e12) {
            return Err(CoreError::SeriesDiverged { what: "pair excitation series", terms: j });
        }
    }
    Err(CoreError::SeriesDiverged { what: "pair excitation series", terms: max_terms })
}
