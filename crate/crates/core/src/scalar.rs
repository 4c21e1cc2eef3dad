//! Scalar abstraction for the numerical core.
//!
//! Everything downstream is generic over [`Scalar`], which closes over the FFT
//! element trait and the dense-factorization field trait. Only `f32` and `f64`
//! implement it; production code uses the `f64` aliases at the crate root.
//!
//! `num_traits::Float` is deliberately not a supertrait: its `abs`/`sqrt`
//! would collide with the `ComplexField` methods of the same name and force
//! fully-qualified calls everywhere. The few helpers that would otherwise be
//! ambiguous live on the trait itself.

use num_complex::Complex;

/// Real scalar usable across the whole crate: FFT element + ordered field
/// with elementary functions and dense-factorization support.
pub trait Scalar: rustfft::FftNum + nalgebra::RealField + Copy {
    /// Embed an `f64` control constant (tolerances, step sizes, weights).
    fn of(x: f64) -> Self;

    /// Widen to `f64` for reporting and serialization.
    fn as_f64(self) -> f64;

    /// Absolute value, named to dodge the `Signed::abs`/`ComplexField::abs`
    /// method-resolution clash.
    #[inline]
    fn rabs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// Unit-modulus phase `exp(i theta)`.
///
/// `Complex::exp` is gated on `num_traits::Float`, which [`Scalar`] omits;
/// every propagator in the crate only ever exponentiates purely imaginary
/// arguments, so this is the one primitive needed.
#[inline]
pub fn cis<T: Scalar>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Squared modulus as a real scalar.
#[inline]
pub fn abs2<T: Scalar>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// Modulus via `norm_sqr`; `Complex::norm` is `Float`-gated.
#[inline]
pub fn cabs<T: Scalar>(z: Complex<T>) -> T {
    abs2(z).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cis_lies_on_unit_circle() {
        for j in 0..64 {
            let th = 0.37 * j as f64;
            let z = cis(th);
            assert!((abs2(z) - 1.0).abs() < 1e-14, "|cis|^2 != 1 at theta={th}");
        }
    }

    #[test]
    fn cis_matches_euler_components() {
        let z = cis(1.25f64);
        assert!((z.re - 1.25f64.cos()).abs() < 1e-15);
        assert!((z.im - 1.25f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn f32_instantiation_round_trips() {
        let x = <f32 as Scalar>::of(0.5);
        assert_eq!(x.as_f64(), 0.5);
        assert_eq!((-2.0f32).rabs(), 2.0f32);
    }
}
