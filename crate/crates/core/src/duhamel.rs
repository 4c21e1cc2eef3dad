//! Two-body linear propagators and the inhomogeneous pair solve.
//!
//! The free and exchange flows are exact Fourier multipliers. The interacting
//! pair flow is a palindromic product of exact unitaries (position phase,
//! free multiplier) over a fixed substep quantum, so calls whose durations
//! are multiples of the quantum compose exactly and negating the duration
//! inverts the product exactly; every map is an isometry of the weighted
//! pair norm to rounding accuracy.
//!
//! `duhamel_solve` integrates {(1/i) d/dt - Dx - Dy + W} S = F with S(0) = 0
//! by a propagated trapezoid sweep in Horner form, so each forcing sample is
//! propagated once per node. The returned series is checked against the
//! sampled equation with a centered time difference; a cadence too coarse
//! for the forcing is an error, not a silently inaccurate answer.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::kernel::Kernel;
use crate::potential::Potential;
use crate::scalar::{cis, Scalar};
use crate::tol;

/// Fixed substep quantum for the interacting pair propagator. Durations that
/// are integer multiples of the quantum split into identical substeps.
pub const PAIR_SUBSTEP_QUANTUM: f64 = 5e-4;

/// Hard cap on substeps in a single propagator call.
pub const PAIR_SUBSTEP_BUDGET: usize = 200_000;

/// e^{it(Dx + Dy)}. Preserves a symmetric tag; a hermitian tag does not
/// survive this flow.
pub fn free_pair_propagate<T: Scalar>(k: &mut Kernel<T>, t: T) {
    pair_multiplier(k, |wr, wc| cis(-t * (wr + wc)));
}

/// e^{it(Dy - Dx)}, the two-sided flow of a density kernel. Preserves a
/// hermitian tag; a symmetric tag does not survive this flow.
pub fn exchange_pair_propagate<T: Scalar>(k: &mut Kernel<T>, t: T) {
    pair_multiplier(k, |wr, wc| cis(t * (wr - wc)));
}

fn pair_multiplier<T: Scalar>(k: &mut Kernel<T>, phase: impl Fn(T, T) -> Complex<T> + Sync) {
    let grid = k.grid().clone();
    let p = grid.points();
    let omega: Vec<T> = (0..p).map(|i| grid.freq_sq(i)).collect();
    k.fft_both(true);
    k.data_mut().par_chunks_mut(p).enumerate().for_each(|(r, row)| {
        let wr = omega[r];
        for (c, z) in row.iter_mut().enumerate() {
            *z *= phase(wr, omega[c]);
        }
    });
    k.fft_both(false);
}

/// e^{it(Dx + Dy - W)} with W(x - y) the coupling-scaled interaction, as a
/// palindromic phase / free / phase product per substep. Symmetric tags
/// survive. Errors when the substep budget would be exceeded.
pub fn potential_pair_propagate<T: Scalar>(
    k: &mut Kernel<T>,
    t: T,
    pot: &Potential<T>,
) -> Result<()> {
    if pot.grid() != k.grid() {
        return Err(CoreError::ShapeMismatch { what: "pair propagator potential grid" });
    }
    let tf = t.as_f64();
    if tf == 0.0 {
        return Ok(());
    }
    let grid = k.grid().clone();
    let p = grid.points();
    let coupling = pot.coupling();
    let w_sup = pot
        .diff_table()
        .iter()
        .fold(T::zero(), |acc, &v| acc.max((coupling * v).rabs()));
    let mut omega_max = T::zero();
    for i in 0..p {
        omega_max = omega_max.max(grid.freq_sq(i));
    }
    // Keep the phase swept by either factor under pi per substep, and never
    // under-resolve the fixed quantum.
    let sweep = (T::of(2.0) * omega_max + w_sup).as_f64();
    let by_quantum = (tf.abs() / PAIR_SUBSTEP_QUANTUM).ceil() as usize;
    let by_sweep = (tf.abs() * sweep / std::f64::consts::PI).ceil() as usize;
    let m = by_quantum.max(by_sweep).max(1);
    if m > PAIR_SUBSTEP_BUDGET {
        return Err(CoreError::SubstepBudget { needed: m, budget: PAIR_SUBSTEP_BUDGET });
    }
    let delta = t / T::of(m as f64);
    let half: Vec<Complex<T>> = pot
        .diff_table()
        .iter()
        .map(|&v| cis(-delta / T::of(2.0) * coupling * v))
        .collect();
    let full: Vec<Complex<T>> = half.iter().map(|&z| z * z).collect();
    // Interior half phases of adjacent substeps merge into full phases; the
    // overall product stays a palindrome.
    k.phase_by_difference(&half);
    for j in 0..m {
        free_pair_propagate(k, delta);
        if j + 1 < m {
            k.phase_by_difference(&full);
        } else {
            k.phase_by_difference(&half);
        }
    }
    Ok(())
}

/// Free or interacting pair flow, by whether an interaction is present.
pub fn pair_propagate<T: Scalar>(
    k: &mut Kernel<T>,
    t: T,
    pot: Option<&Potential<T>>,
) -> Result<()> {
    match pot {
        Some(pot) => potential_pair_propagate(k, t, pot),
        None => {
            free_pair_propagate(k, t);
            Ok(())
        }
    }
}

/// (Dx + Dy - W) K, the generator the pair propagators exponentiate.
pub(crate) fn apply_pair_generator<T: Scalar>(
    k: &Kernel<T>,
    pot: Option<&Potential<T>>,
) -> Kernel<T> {
    let grid = k.grid().clone();
    let p = grid.points();
    let omega: Vec<T> = (0..p).map(|i| grid.freq_sq(i)).collect();
    let mut out = k.clone();
    out.fft_both(true);
    out.data_mut().par_chunks_mut(p).enumerate().for_each(|(r, row)| {
        let wr = omega[r];
        for (c, z) in row.iter_mut().enumerate() {
            *z = z.scale(-(wr + omega[c]));
        }
    });
    out.fft_both(false);
    if let Some(pot) = pot {
        let coupling = pot.coupling();
        let w: Vec<T> = pot.diff_table().iter().map(|&v| coupling * v).collect();
        let mut wk = k.clone();
        wk.weight_by_difference(&w);
        out.axpy(Complex::new(-T::one(), T::zero()), &wk);
    }
    out
}

/// Trapezoid-in-time solution of {(1/i) d/dt - Dx - Dy + W} S = F, S(0) = 0,
/// from forcing samples at a uniform cadence `delta`. Returns the series at
/// every node. The centered-difference residual of the returned series
/// against the sampled equation must stay within the pinned fraction of the
/// forcing size; otherwise the cadence is reported as too coarse.
pub fn duhamel_solve<T: Scalar>(
    forcing: &[Kernel<T>],
    delta: T,
    pot: Option<&Potential<T>>,
) -> Result<Vec<Kernel<T>>> {
    if forcing.len() < 3 {
        return Err(CoreError::InvalidArgument {
            what: "forcing samples",
            detail: format!("{} nodes, want at least 3", forcing.len()),
        });
    }
    if !(delta.as_f64() > 0.0) {
        return Err(CoreError::InvalidArgument {
            what: "forcing cadence",
            detail: format!("delta = {}, want > 0", delta.as_f64()),
        });
    }
    let grid = forcing[0].grid().clone();
    if forcing.iter().any(|f| f.grid() != &grid)
        || pot.is_some_and(|p| p.grid() != &grid)
    {
        return Err(CoreError::ShapeMismatch { what: "forcing sample grids" });
    }
    let m = forcing.len() - 1;
    let i_unit = Complex::new(T::zero(), T::one());
    let half = Complex::new(delta / T::of(2.0), T::zero());
    let whole = Complex::new(delta, T::zero());

    // Horner sweep: acc_j = U(delta) acc_{j-1} + delta F_j carries the open
    // trapezoid; closing the half weight at the current node gives the value.
    let mut series = Vec::with_capacity(m + 1);
    let mut acc = forcing[0].clone();
    acc.scale(half);
    series.push(Kernel::zero(&grid, forcing[0].sym()));
    for f in forcing.iter().skip(1) {
        pair_propagate(&mut acc, delta, pot)?;
        acc.axpy(whole, f);
        let mut value = acc.clone();
        value.axpy(-half, f);
        value.scale(i_unit);
        series.push(value);
    }

    let rel = series_residual(&series, forcing, delta, pot);
    if rel.as_f64() > tol::DUHAMEL_RESIDUAL {
        return Err(CoreError::CadenceTooCoarse {
            residual: rel.as_f64(),
            tol: tol::DUHAMEL_RESIDUAL,
        });
    }
    Ok(series)
}

/// Centered-difference defect of a series against the sampled equation,
/// relative to the largest forcing sample.
fn series_residual<T: Scalar>(
    series: &[Kernel<T>],
    forcing: &[Kernel<T>],
    delta: T,
    pot: Option<&Potential<T>>,
) -> T {
    let m = forcing.len() - 1;
    let scale = forcing.iter().fold(T::zero(), |a, f| a.max(f.hs_norm()));
    let mut worst = T::zero();
    for j in 1..m {
        let mut resid = series[j + 1].clone();
        resid.axpy(Complex::new(-T::one(), T::zero()), &series[j - 1]);
        resid.scale(Complex::new(T::zero(), -T::one() / (T::of(2.0) * delta)));
        let gen = apply_pair_generator(&series[j], pot);
        resid.axpy(Complex::new(-T::one(), T::zero()), &gen);
        resid.axpy(Complex::new(-T::one(), T::zero()), &forcing[j]);
        worst = worst.max(resid.hs_norm());
    }
    worst / scale.max(T::of(f64::MIN_POSITIVE))
}

/// Relative defects of the interacting solve against its free-solve
/// expansions, evaluated at the final node.
#[derive(Clone, Copy, Debug)]
pub struct PairResolventResiduals<T> {
    /// Defect of the one-step expansion closed by the interacting solve.
    pub pot1: T,
    /// Same expansion with the correction applied in swapped order.
    pub pot1_swapped: T,
    /// Gap between the two correction kernels, relative to the forcing size.
    pub forms_gap: T,
    /// Defect of the two-step expansion whose middle solve is interacting.
    pub pot2: T,
    /// Defect after truncating the expansion to two terms; quadratic in the
    /// interaction amplitude.
    pub born2: T,
}

/// Solves the interacting and free pair equations for one forcing history and
/// measures how well the interacting solution is reproduced by free solves
/// dressed with the difference-weighted interaction.
pub fn resolvent_identity_residual<T: Scalar>(
    forcing: &[Kernel<T>],
    delta: T,
    pot: &Potential<T>,
) -> Result<PairResolventResiduals<T>> {
    let coupling = pot.coupling();
    let w: Vec<T> = pot.diff_table().iter().map(|&v| coupling * v).collect();
    let reweigh = |series: &[Kernel<T>]| -> Vec<Kernel<T>> {
        series
            .iter()
            .map(|k| {
                let mut out = k.clone();
                out.weight_by_difference(&w);
                out
            })
            .collect()
    };

    let nf = duhamel_solve(forcing, delta, Some(pot))?;
    let n0f = duhamel_solve(forcing, delta, None)?;
    let wn0f = reweigh(&n0f);
    let nwn0f = duhamel_solve(&wn0f, delta, Some(pot))?;
    let n0wnf = duhamel_solve(&reweigh(&nf), delta, None)?;
    let n0wn0f = duhamel_solve(&wn0f, delta, None)?;
    let n0wnwn0f = duhamel_solve(&reweigh(&nwn0f), delta, None)?;

    let m = forcing.len() - 1;
    let minus = Complex::new(-T::one(), T::zero());
    let plus = Complex::new(T::one(), T::zero());
    let denom = nf[m].hs_norm().max(T::of(f64::MIN_POSITIVE));
    let f_scale = forcing
        .iter()
        .fold(T::zero(), |a, f| a.max(f.hs_norm()))
        .max(T::of(f64::MIN_POSITIVE));

    let mut d1 = nf[m].clone();
    d1.axpy(minus, &n0f[m]);
    d1.axpy(plus, &nwn0f[m]);
    let pot1 = d1.hs_norm() / denom;

    let mut d1s = nf[m].clone();
    d1s.axpy(minus, &n0f[m]);
    d1s.axpy(plus, &n0wnf[m]);
    let pot1_swapped = d1s.hs_norm() / denom;

    let mut gap = nwn0f[m].clone();
    gap.axpy(minus, &n0wnf[m]);
    let forms_gap = gap.hs_norm() / f_scale;

    let mut d2 = nf[m].clone();
    d2.axpy(minus, &n0f[m]);
    d2.axpy(plus, &n0wn0f[m]);
    let born2 = d2.hs_norm() / denom;
    d2.axpy(minus, &n0wnwn0f[m]);
    let pot2 = d2.hs_norm() / denom;

    Ok(PairResolventResiduals { pot1, pot1_swapped, forms_gap, pot2, born2 })
}
