//! Conserved and monitored quantities of a state: particle number,
//! energy, the local densities (mass, current, kinetic), the stress
//! tensor with its isotropic pressure, the interaction force density,
//! continuity residuals along a trajectory, and the virial action of a
//! pair weight together with its rate split.
//!
//! All spatial derivatives are spectral. The virial weight is the
//! mollified radius a_eps(u) = sqrt(|u|^2 + eps^2) sampled on the
//! minimal-image difference lattice; its gradient, Laplacian, Hessian,
//! and bi-Laplacian tables are Fourier multipliers of that one sampled
//! profile, which keeps every lattice integration by parts in the rate
//! identity exact and leaves only time discretization and aliasing in
//! the measured residual.

use num_complex::Complex;
use rayon::prelude::*;

use crate::dynamics::Trajectory;
use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::kernel::{Kernel, KernelSymmetry};
use crate::potential::Potential;
use crate::scalar::Scalar;
use crate::state::HfbState;

/// Trace of the one-body kernel; equal to one for normalized data and
/// conserved by the flow.
pub fn particle_number<T: Scalar>(s: &HfbState<T>) -> T {
    let tr = s.gamma.trace();
    debug_assert!(
        tr.im.rabs() <= T::of(1e-10) * tr.re.rabs().max(T::one()),
        "one-body trace has a non-real part"
    );
    tr.re
}

/// Energy per particle: the mixed-gradient trace plus the pairing,
/// exchange, direct, and condensate interaction terms.
///
/// The kinetic trace is read off the double Fourier transform,
/// (h^d / P) sum_k |k|^2 Ghat(k, -k); the quadratic interaction terms
/// are lattice double sums against the difference-indexed potential.
pub fn total_energy<T: Scalar>(s: &HfbState<T>, pot: Option<&Potential<T>>) -> T {
    let g = s.grid();
    let d = g.dim();
    let n = g.n();
    let p = g.points();
    let mut hat = s.gamma.clone();
    hat.tag_unchecked(KernelSymmetry::None);
    hat.fft_both(true);
    let data = hat.data();
    let mut idx = [0usize; 3];
    let mut kin = T::zero();
    for flat in 0..p {
        g.decompose(flat, d, &mut idx[..d]);
        let mut neg = 0usize;
        for a in 0..d {
            neg = neg * n + (n - idx[a]) % n;
        }
        kin += g.freq_sq(flat) * data[flat * p + neg].re;
    }
    kin *= g.weight() / T::of(p as f64);
    let Some(v) = pot else { return kin };

    let vtab = v.diff_table();
    let gd = s.gamma.data();
    let ld = s.lambda.data();
    let gc = g.clone();
    // (1/2) h^{2d} sum V(x-y) (|Gamma(x,y)|^2 + |Lambda(x,y)|^2)
    let quad = (0..p)
        .into_par_iter()
        .map(|x| {
            let mut xi = [0usize; 3];
            let mut yi = [0usize; 3];
            gc.decompose(x, d, &mut xi[..d]);
            let grow = &gd[x * p..(x + 1) * p];
            let lrow = &ld[x * p..(x + 1) * p];
            let mut acc = T::zero();
            for y in 0..p {
                gc.decompose(y, d, &mut yi[..d]);
                let mut flat = 0usize;
                for a in 0..d {
                    flat = flat * n + (xi[a] + n - yi[a]) % n;
                }
                acc += vtab[flat] * (grow[y].norm_sqr() + lrow[y].norm_sqr());
            }
            acc
        })
        .reduce(T::zero, |a, b| a + b);

    let rho = s.gamma.diagonal();
    let phi2 = real_field(g, s.phi.data().iter().map(|z| z.norm_sqr()).collect());
    let direct = rho.inner(&v.convolve(&rho)).re;
    let cond = phi2.inner(&v.convolve(&phi2)).re;
    let half = T::of(0.5);
    kin + half * g.weight() * g.weight() * quad + half * direct - cond
}

/// Kinetic energy density grad_x . grad_y Gamma on the diagonal;
/// nonnegative for a positive kernel, integrating to the kinetic trace.
pub fn kinetic_density<T: Scalar>(s: &HfbState<T>) -> Field<T> {
    let g = s.grid();
    let one = Complex::new(T::one(), T::zero());
    let mut out = Field::zero(g);
    for j in 0..g.dim() {
        out.axpy(one, &derived_kernel(&s.gamma, Some(j), Some(j)).diagonal());
    }
    out
}

/// Current density: the antisymmetric mixed first derivative of the
/// one-body kernel on the diagonal, (1/2i)(d/dy_j - d/dx_j) Gamma|_{y=x},
/// one field per axis.
pub fn momentum_density<T: Scalar>(s: &HfbState<T>) -> Vec<Field<T>> {
    let g = s.grid();
    (0..g.dim())
        .map(|j| {
            let mut out = derived_kernel(&s.gamma, None, Some(j)).diagonal();
            out.axpy(Complex::new(-T::one(), T::zero()), &derived_kernel(&s.gamma, Some(j), None).diagonal());
            out.scale(Complex::new(T::zero(), -T::of(0.5)));
            out
        })
        .collect()
}

/// Stress tensor components (row-major, d*d fields) and the isotropic
/// pressure they travel with.
pub struct StressPressure<T: Scalar> {
    pub sigma: Vec<Field<T>>,
    pub pressure: Field<T>,
}

/// Stress tensor sigma_jk = (d/dx_j d/dy_k + d/dx_k d/dy_j) Gamma on the
/// diagonal, and pressure p = (1/2)(-Lap rho + q) with q the interaction
/// moment of the diagonal pair density.
pub fn stress_and_pressure<T: Scalar>(s: &HfbState<T>, pot: Option<&Potential<T>>) -> StressPressure<T> {
    let g = s.grid();
    let d = g.dim();
    let one = Complex::new(T::one(), T::zero());
    let mut mixed = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in 0..d {
            mixed.push(derived_kernel(&s.gamma, Some(j), Some(k)).diagonal());
        }
    }
    let mut sigma = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in 0..d {
            let mut f = mixed[j * d + k].clone();
            f.axpy(one, &mixed[k * d + j]);
            sigma.push(f);
        }
    }
    let rho = s.gamma.diagonal();
    let mut lap = rho.clone();
    lap.filter_spectrum(|flat| Complex::new(-g.freq_sq(flat), T::zero()));
    let mut pressure = match pot {
        Some(v) => real_field(g, interaction_moment(s, v)),
        None => Field::zero(g),
    };
    pressure.axpy(-one, &lap);
    pressure.scale(Complex::new(T::of(0.5), T::zero()));
    StressPressure { sigma, pressure }
}

/// Force density exerted by the interaction on the momentum balance:
/// l_j(x) = (1/2) h^d sum_y V(x-y) (d/dy_j - d/dx_j) L(x,y;x,y), one
/// field per axis. Zero without a potential.
pub fn interaction_force<T: Scalar>(s: &HfbState<T>, pot: Option<&Potential<T>>) -> Vec<Field<T>> {
    let g = s.grid();
    let d = g.dim();
    let Some(v) = pot else {
        return (0..d).map(|_| Field::zero(g)).collect();
    };
    let pair = pair_diagonal(s);
    let f = Kernel::from_data(
        g,
        KernelSymmetry::Symmetric,
        pair.iter().map(|&r| Complex::new(r, T::zero())).collect(),
    )
    .expect("pair table is grid sized");
    let half = T::of(0.5);
    (0..d)
        .map(|j| {
            let mut diff = derived_kernel(&f, None, Some(j));
            diff.axpy(Complex::new(-T::one(), T::zero()), &derived_kernel(&f, Some(j), None));
            let sums = potential_row_sums(v, &diff);
            Field::from_data(g, sums.iter().map(|z| z.scale(half)).collect())
                .expect("row sums are grid sized")
        })
        .collect()
}

/// L^2 residuals of the mass and momentum balance laws along a
/// trajectory, one value per interior snapshot: mass residual
/// d rho/dt + 2 div P, momentum residual d P/dt + div(sigma + p I) + l,
/// with centered time differences at the snapshot spacing.
pub fn continuity_residual<T: Scalar>(
    traj: &Trajectory<T>,
    pot: Option<&Potential<T>>,
) -> Result<(Vec<T>, Vec<T>)> {
    let m = traj.snapshots.len();
    if m < 3 {
        return Err(CoreError::InvalidArgument {
            what: "trajectory snapshots",
            detail: format!("{m} snapshots, want at least 3 for centered differences"),
        });
    }
    let times = traj.times();
    let step = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - step).rabs() > T::of(1e-12) * step.rabs().max(T::one()) {
            return Err(CoreError::InvalidArgument {
                what: "snapshot spacing",
                detail: "centered differences need uniform snapshot times".to_string(),
            });
        }
    }
    let g = traj.snapshots[0].grid().clone();
    let d = g.dim();
    let one = Complex::new(T::one(), T::zero());
    let rhos: Vec<Field<T>> = traj.snapshots.iter().map(|s| s.gamma.diagonal()).collect();
    let moms: Vec<Vec<Field<T>>> = traj.snapshots.iter().map(momentum_density).collect();
    let inv2 = Complex::new(T::one() / (T::of(2.0) * step), T::zero());
    let mut r_mass = Vec::with_capacity(m - 2);
    let mut r_mom = Vec::with_capacity(m - 2);
    for j in 1..m - 1 {
        let mut res = rhos[j + 1].clone();
        res.axpy(-one, &rhos[j - 1]);
        res.scale(inv2);
        for a in 0..d {
            res.axpy(Complex::new(T::of(2.0), T::zero()), &field_derivative(&moms[j][a], a));
        }
        r_mass.push(res.norm());

        let sp = stress_and_pressure(&traj.snapshots[j], pot);
        let force = interaction_force(&traj.snapshots[j], pot);
        let mut acc = T::zero();
        for c in 0..d {
            let mut res = moms[j + 1][c].clone();
            res.axpy(-one, &moms[j - 1][c]);
            res.scale(inv2);
            for k in 0..d {
                res.axpy(one, &field_derivative(&sp.sigma[c * d + k], k));
            }
            res.axpy(one, &field_derivative(&sp.pressure, c));
            res.axpy(one, &force[c]);
            acc += res.norm_sq();
        }
        r_mom.push(acc.sqrt());
    }
    Ok((r_mass, r_mom))
}

/// Virial action of the mollified pair weight:
/// 2 II grad a_eps(x-y) . [P(x) rho(y) - rho(x) P(y)].
pub fn morawetz_action<T: Scalar>(s: &HfbState<T>, eps: T) -> Result<T> {
    let g = s.grid();
    let w = pair_weight(g, eps)?;
    let rho = s.gamma.diagonal();
    let mom = momentum_density(s);
    let mut m = T::zero();
    for j in 0..g.dim() {
        m += convolution_pairing(g, &mom[j], &w.grad_hat[j], &rho);
        m -= convolution_pairing(g, &rho, &w.grad_hat[j], &mom[j]);
    }
    Ok(T::of(2.0) * m)
}

/// The four contributions to the time derivative of the virial action:
/// the bi-Laplacian density pairing, the Laplacian-weighted interaction
/// moment, the Hessian contraction against stress and current, and the
/// gradient pairing against the interaction force. Their sum is the
/// action rate.
pub fn morawetz_rate_terms<T: Scalar>(
    s: &HfbState<T>,
    pot: Option<&Potential<T>>,
    eps: T,
) -> Result<[T; 4]> {
    let g = s.grid();
    let d = g.dim();
    let w = pair_weight(g, eps)?;
    let rho = s.gamma.diagonal();
    let mom = momentum_density(s);
    let sp = stress_and_pressure(s, None);

    let term1 = T::of(2.0) * convolution_pairing(g, &rho, &w.neg_bilap_hat, &rho);

    let (term2, term4) = match pot {
        Some(v) => {
            let q = real_field(g, interaction_moment(s, v));
            let t2 = convolution_pairing(g, &rho, &w.lap_hat, &q)
                + convolution_pairing(g, &q, &w.lap_hat, &rho);
            let force = interaction_force(s, pot);
            let mut t4 = T::zero();
            for j in 0..d {
                t4 += convolution_pairing(g, &rho, &w.grad_hat[j], &force[j]);
                t4 -= convolution_pairing(g, &force[j], &w.grad_hat[j], &rho);
            }
            (t2, T::of(2.0) * t4)
        }
        None => (T::zero(), T::zero()),
    };

    let mut t3 = T::zero();
    for j in 0..d {
        for k in 0..d {
            let hh = &w.hess_hat[j * d + k];
            t3 += convolution_pairing(g, &sp.sigma[j * d + k], hh, &rho);
            t3 += convolution_pairing(g, &rho, hh, &sp.sigma[j * d + k]);
            t3 -= T::of(4.0) * convolution_pairing(g, &mom[j], hh, &mom[k]);
        }
    }
    Ok([term1, term2, T::of(2.0) * t3, term4])
}

/// Largest pointwise violations of the kernel Cauchy-Schwarz bounds:
/// d0 over |Gamma(x,y)|^2 - Gamma(x,x) Gamma(y,y) and d1 over the
/// gradient analogue |grad_x Gamma(x,y)|^2 - E_k(x) Gamma(y,y). Both
/// stay at roundoff for a positive kernel.
pub fn cauchy_schwarz_defect<T: Scalar>(s: &HfbState<T>) -> (T, T) {
    let g = s.grid();
    let p = g.points();
    let diag: Vec<T> = s.gamma.diagonal().data().iter().map(|z| z.re).collect();
    let gd = s.gamma.data();
    let d0 = (0..p)
        .into_par_iter()
        .map(|x| {
            let row = &gd[x * p..(x + 1) * p];
            let mut m = T::of(f64::NEG_INFINITY);
            for (y, z) in row.iter().enumerate() {
                let v = z.norm_sqr() - diag[x] * diag[y];
                if v > m {
                    m = v;
                }
            }
            m
        })
        .reduce(|| T::of(f64::NEG_INFINITY), |a, b| if a > b { a } else { b });

    let ek: Vec<T> = kinetic_density(s).data().iter().map(|z| z.re).collect();
    let mut gsq = vec![T::zero(); p * p];
    for j in 0..g.dim() {
        let dj = derived_kernel(&s.gamma, Some(j), None);
        gsq.par_iter_mut().zip(dj.data().par_iter()).for_each(|(o, z)| *o += z.norm_sqr());
    }
    let d1 = (0..p)
        .into_par_iter()
        .map(|x| {
            let row = &gsq[x * p..(x + 1) * p];
            let mut m = T::of(f64::NEG_INFINITY);
            for (y, &v) in row.iter().enumerate() {
                let w = v - ek[x] * diag[y];
                if w > m {
                    m = w;
                }
            }
            m
        })
        .reduce(|| T::of(f64::NEG_INFINITY), |a, b| if a > b { a } else { b });
    (d0, d1)
}

/// Copy of `k` with a spectral first derivative applied to the row
/// argument, the column argument, or both.
fn derived_kernel<T: Scalar>(k: &Kernel<T>, row: Option<usize>, col: Option<usize>) -> Kernel<T> {
    let g = k.grid().clone();
    let mut out = k.clone();
    out.tag_unchecked(KernelSymmetry::None);
    if let Some(j) = row {
        out.fft_rows(true);
        out.scale_rows(&axis_symbol(&g, j));
        out.fft_rows(false);
    }
    if let Some(j) = col {
        out.fft_cols(true);
        out.scale_cols(&axis_symbol(&g, j));
        out.fft_cols(false);
    }
    out
}

/// i k_j over the flat spectral index.
fn axis_symbol<T: Scalar>(g: &Grid<T>, axis: usize) -> Vec<Complex<T>> {
    let d = g.dim();
    let mut idx = [0usize; 3];
    (0..g.points())
        .map(|flat| {
            g.decompose(flat, d, &mut idx[..d]);
            Complex::new(T::zero(), g.freq(idx[axis]))
        })
        .collect()
}

/// Spectral d/dx_axis of a field.
fn field_derivative<T: Scalar>(f: &Field<T>, axis: usize) -> Field<T> {
    let g = f.grid().clone();
    let d = g.dim();
    let mut out = f.clone();
    let mut idx = [0usize; 3];
    out.filter_spectrum(move |flat| {
        g.decompose(flat, d, &mut idx[..d]);
        Complex::new(T::zero(), g.freq(idx[axis]))
    });
    out
}

fn real_field<T: Scalar>(g: &Grid<T>, data: Vec<T>) -> Field<T> {
    Field::from_data(g, data.into_iter().map(|r| Complex::new(r, T::zero())).collect())
        .expect("real samples are grid sized")
}

/// Diagonal pair density L(x,y;x,y) = rho(x) rho(y) + |Gamma(x,y)|^2
/// + |Lambda(x,y)|^2 - 2 |phi(x)|^2 |phi(y)|^2 as a dense real table.
fn pair_diagonal<T: Scalar>(s: &HfbState<T>) -> Vec<T> {
    let g = s.grid();
    let p = g.points();
    let rd: Vec<T> = s.gamma.diagonal().data().iter().map(|z| z.re).collect();
    let pd: Vec<T> = s.phi.data().iter().map(|z| z.norm_sqr()).collect();
    let gd = s.gamma.data();
    let ld = s.lambda.data();
    let two = T::of(2.0);
    let mut out = vec![T::zero(); p * p];
    out.par_chunks_mut(p).enumerate().for_each(|(x, row)| {
        let grow = &gd[x * p..(x + 1) * p];
        let lrow = &ld[x * p..(x + 1) * p];
        for y in 0..p {
            row[y] = rd[x] * rd[y] + grow[y].norm_sqr() + lrow[y].norm_sqr() - two * pd[x] * pd[y];
        }
    });
    out
}

/// Interaction moment q(x) = h^d sum_y V(x-y) L(x,y;x,y), fused so the
/// pair table is never materialized.
fn interaction_moment<T: Scalar>(s: &HfbState<T>, v: &Potential<T>) -> Vec<T> {
    let g = s.grid();
    let d = g.dim();
    let n = g.n();
    let p = g.points();
    let rd: Vec<T> = s.gamma.diagonal().data().iter().map(|z| z.re).collect();
    let pd: Vec<T> = s.phi.data().iter().map(|z| z.norm_sqr()).collect();
    let gd = s.gamma.data();
    let ld = s.lambda.data();
    let vtab = v.diff_table();
    let gc = g.clone();
    let two = T::of(2.0);
    let mut out = vec![T::zero(); p];
    out.par_iter_mut().enumerate().for_each(|(x, o)| {
        let mut xi = [0usize; 3];
        let mut yi = [0usize; 3];
        gc.decompose(x, d, &mut xi[..d]);
        let grow = &gd[x * p..(x + 1) * p];
        let lrow = &ld[x * p..(x + 1) * p];
        let mut acc = T::zero();
        for y in 0..p {
            gc.decompose(y, d, &mut yi[..d]);
            let mut flat = 0usize;
            for a in 0..d {
                flat = flat * n + (xi[a] + n - yi[a]) % n;
            }
            acc += vtab[flat]
                * (rd[x] * rd[y] + grow[y].norm_sqr() + lrow[y].norm_sqr() - two * pd[x] * pd[y]);
        }
        *o = acc * gc.weight();
    });
    out
}

/// h^d sum_y V(x-y) K(x,y) for every x.
fn potential_row_sums<T: Scalar>(v: &Potential<T>, k: &Kernel<T>) -> Vec<Complex<T>> {
    let g = k.grid();
    let d = g.dim();
    let n = g.n();
    let p = g.points();
    let vtab = v.diff_table();
    let data = k.data();
    let gc = g.clone();
    let mut out = vec![Complex::new(T::zero(), T::zero()); p];
    out.par_iter_mut().enumerate().for_each(|(x, o)| {
        let mut xi = [0usize; 3];
        let mut yi = [0usize; 3];
        gc.decompose(x, d, &mut xi[..d]);
        let row = &data[x * p..(x + 1) * p];
        let mut acc = Complex::new(T::zero(), T::zero());
        for y in 0..p {
            gc.decompose(y, d, &mut yi[..d]);
            let mut flat = 0usize;
            for a in 0..d {
                flat = flat * n + (xi[a] + n - yi[a]) % n;
            }
            acc += row[y].scale(vtab[flat]);
        }
        *o = acc.scale(gc.weight());
    });
    out
}

/// Fourier tables of the mollified pair weight's derivatives, ready for
/// convolution pairings.
struct PairWeight<T: Scalar> {
    grad_hat: Vec<Vec<Complex<T>>>,
    lap_hat: Vec<Complex<T>>,
    hess_hat: Vec<Vec<Complex<T>>>,
    neg_bilap_hat: Vec<Complex<T>>,
}

fn pair_weight<T: Scalar>(g: &Grid<T>, eps: T) -> Result<PairWeight<T>> {
    let h = g.h();
    if eps < T::of(2.0) * h {
        let m = (T::of(2.0) * g.edge() / eps).as_f64().ceil() as usize;
        return Err(CoreError::ResolutionGuard {
            scaled_step: (h / eps).as_f64(),
            limit: 0.5,
            minimal_n: m + m % 2,
        });
    }
    let d = g.dim();
    let p = g.points();
    let mut idx = [0usize; 3];
    let mut hat: Vec<Complex<T>> = (0..p)
        .map(|flat| {
            g.decompose(flat, d, &mut idx[..d]);
            let mut r2 = eps * eps;
            for a in 0..d {
                let u = g.displacement(idx[a]);
                r2 += u * u;
            }
            Complex::new(r2.sqrt(), T::zero())
        })
        .collect();
    g.fft_all(&mut hat, d, true);
    let freq_at = |flat: usize, axis: usize| {
        let mut idx = [0usize; 3];
        g.decompose(flat, d, &mut idx[..d]);
        g.freq(idx[axis])
    };
    let grad_hat: Vec<Vec<Complex<T>>> = (0..d)
        .map(|j| {
            hat.iter()
                .enumerate()
                .map(|(flat, z)| z * Complex::new(T::zero(), freq_at(flat, j)))
                .collect()
        })
        .collect();
    let lap_hat: Vec<Complex<T>> =
        hat.iter().enumerate().map(|(flat, z)| z.scale(-g.freq_sq(flat))).collect();
    let hess_hat: Vec<Vec<Complex<T>>> = (0..d * d)
        .map(|jk| {
            let (j, k) = (jk / d, jk % d);
            hat.iter()
                .enumerate()
                .map(|(flat, z)| z.scale(-freq_at(flat, j) * freq_at(flat, k)))
                .collect()
        })
        .collect();
    let neg_bilap_hat: Vec<Complex<T>> = hat
        .iter()
        .enumerate()
        .map(|(flat, z)| {
            let k2 = g.freq_sq(flat);
            z.scale(-(k2 * k2))
        })
        .collect();
    Ok(PairWeight { grad_hat, lap_hat, hess_hat, neg_bilap_hat })
}

/// Pairing h^{2d} sum_{x,y} t(x-y) f(x) q(y) with the table supplied
/// spectrally; real part of the weighted sum.
fn convolution_pairing<T: Scalar>(
    g: &Grid<T>,
    f: &Field<T>,
    t_hat: &[Complex<T>],
    q: &Field<T>,
) -> T {
    let mut hat = q.spectrum();
    for (z, t) in hat.iter_mut().zip(t_hat) {
        *z *= *t;
    }
    g.fft_all(&mut hat, g.dim(), false);
    let mut s = Complex::new(T::zero(), T::zero());
    for (a, b) in f.data().iter().zip(&hat) {
        s += a * b;
    }
    s.re * g.weight() * g.weight()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::data::{gaussian_packet, gaussian_pair_profile};
    use crate::dynamics::evolve;
    use crate::potential::Profile;
    use crate::scalar::cis;
    use crate::state::sinh_series;
    use crate::tol;

    type C = Complex<f64>;

    fn grid(d: usize, n: usize, edge: f64) -> Grid<f64> {
        Grid::new(d, n, edge).unwrap()
    }

    /// Quasi-free state with condensate and pair parts, normalized to
    /// unit particle number.
    fn mixed_state(g: &Grid<f64>, pair_amp: f64, n_particles: f64, beta: f64) -> HfbState<f64> {
        let d = g.dim();
        let mut mom = vec![0i64; d];
        mom[0] = 1;
        let phi = gaussian_packet(g, &vec![0.4; d], &mom, 1.1).unwrap();
        let k =
            gaussian_pair_profile(g, pair_amp, &vec![0.0; d], &vec![0; d], 1.3, 1.0).unwrap();
        HfbState::from_pair_excitation(phi, &k, n_particles, beta, true).unwrap()
    }

    /// Positive rank-three density kernel from three packets.
    fn packet_mixture(g: &Grid<f64>) -> Kernel<f64> {
        let d = g.dim();
        let mut m1 = vec![0i64; d];
        m1[0] = 1;
        let mut m3 = vec![0i64; d];
        m3[d - 1] = -1;
        let f1 = gaussian_packet(g, &vec![0.4; d], &m1, 1.0).unwrap();
        let f2 = gaussian_packet(g, &vec![-0.8; d], &vec![0; d], 1.3).unwrap();
        let f3 = gaussian_packet(g, &vec![0.0; d], &m3, 1.6).unwrap();
        let mut gam = Kernel::outer(&f1.conj(), &f1);
        gam.scale(C::new(0.5, 0.0));
        gam.add_scaled_outer(C::new(0.3, 0.0), &f2.conj(), &f2);
        gam.add_scaled_outer(C::new(0.2, 0.0), &f3.conj(), &f3);
        gam.tag_unchecked(KernelSymmetry::Hermitian);
        gam
    }

    /// Kernel-only state around a given density kernel; the condensate
    /// and pair components are zero.
    fn kernel_state(g: &Grid<f64>, gamma: Kernel<f64>) -> HfbState<f64> {
        HfbState {
            time: 0.0,
            phi: Field::zero(g),
            lambda: Kernel::zero(g, KernelSymmetry::Symmetric),
            gamma,
            n_particles: 8.0,
            beta: 0.5,
        }
    }

    fn real_parts(f: &Field<f64>) -> Vec<f64> {
        f.data().iter().map(|z| z.re).collect()
    }

    fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    /// Normalized plane-wave condensate e^{i k x} / sqrt(L) in d = 1.
    fn plane_wave_state(g: &Grid<f64>, mode: i64) -> (HfbState<f64>, f64) {
        let kf = 2.0 * PI * mode as f64 / g.edge();
        let data: Vec<C> = (0..g.n()).map(|i| cis(kf * g.h() * i as f64)).collect();
        let mut phi = Field::from_data(g, data).unwrap();
        let nrm = phi.norm();
        phi.scale(C::new(1.0 / nrm, 0.0));
        (HfbState::pure_condensate(phi, 8.0, 0.5).unwrap(), kf)
    }

    /// d = 1 spectral derivative of one kernel argument by explicit
    /// discrete Fourier sums; the oracle shares no code with the FFT
    /// pipeline it checks.
    fn naive_arg_derivative(k: &Kernel<f64>, g: &Grid<f64>, second_arg: bool) -> Vec<C> {
        let n = g.n();
        let d = k.data();
        let mut out = vec![C::new(0.0, 0.0); n * n];
        for x in 0..n {
            for y in 0..n {
                let mut acc = C::new(0.0, 0.0);
                for m in 0..n {
                    let kf = g.freq(m);
                    for z in 0..n {
                        let (src, from, to) = if second_arg {
                            (d[x * n + z], z, y)
                        } else {
                            (d[z * n + y], z, x)
                        };
                        acc += C::new(0.0, kf) * cis(kf * g.h() * (to as f64 - from as f64)) * src;
                    }
                }
                out[x * n + y] = acc / n as f64;
            }
        }
        out
    }

    /// d = 1 multiplier applied to a real difference table by explicit
    /// Fourier sums.
    fn naive_symbol_table(t: &[f64], g: &Grid<f64>, sym: impl Fn(f64) -> C) -> Vec<f64> {
        let n = g.n();
        let mut out = vec![0.0; n];
        for (u, o) in out.iter_mut().enumerate() {
            let mut acc = C::new(0.0, 0.0);
            for m in 0..n {
                let kf = g.freq(m);
                let mut hatm = C::new(0.0, 0.0);
                for (v, tv) in t.iter().enumerate() {
                    hatm += cis(-kf * g.h() * v as f64) * tv;
                }
                acc += sym(kf) * hatm * cis(kf * g.h() * u as f64);
            }
            *o = acc.re / n as f64;
        }
        out
    }

    /// Mollified radius table on the d = 1 difference lattice.
    fn radius_table(g: &Grid<f64>, eps: f64) -> Vec<f64> {
        (0..g.n())
            .map(|i| {
                let u = g.displacement(i);
                (u * u + eps * eps).sqrt()
            })
            .collect()
    }

    #[test]
    fn particle_number_tracks_component_masses() {
        let g = grid(1, 32, 8.0);
        let phi = gaussian_packet(&g, &[0.3], &[1], 1.0).unwrap();
        let k = gaussian_pair_profile(&g, 0.25, &[0.0], &[0], 1.2, 0.8).unwrap();
        let s = HfbState::from_pair_excitation(phi.clone(), &k, 8.0, 0.5, false).unwrap();
        let sh = sinh_series(&k).unwrap();
        let pair_mass: f64 =
            sh.data().iter().map(|z| z.norm_sqr()).sum::<f64>() * g.weight() * g.weight();
        let want = phi.norm_sq() + pair_mass / 8.0;
        assert!((particle_number(&s) - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn normalized_excitation_has_unit_number() {
        let g = grid(1, 32, 8.0);
        let s = mixed_state(&g, 0.25, 8.0, 0.5);
        assert!((particle_number(&s) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn free_plane_wave_energy_is_its_frequency() {
        let g = grid(1, 32, 8.0);
        let (s, kf) = plane_wave_state(&g, 2);
        let e = total_energy(&s, None);
        assert!((e - kf * kf).abs() <= 1e-10 * kf * kf);
    }

    #[test]
    fn condensate_energy_reduces_to_hartree_form() {
        let g = grid(1, 64, 16.0);
        let pot = Potential::new(&g, &Profile::Bump, 8.0, 0.5, 0.7).unwrap();
        let phi = gaussian_packet(&g, &[0.0], &[1], 1.2).unwrap();
        let s = HfbState::pure_condensate(phi.clone(), 8.0, 0.5).unwrap();
        let kin = real_parts(&kinetic_density(&s)).iter().sum::<f64>() * g.weight();
        let vt = pot.diff_table();
        let rho: Vec<f64> = phi.data().iter().map(|z| z.norm_sqr()).collect();
        let n = g.n();
        let mut q = 0.0;
        for x in 0..n {
            for y in 0..n {
                q += vt[(x + n - y) % n] * rho[x] * rho[y];
            }
        }
        q *= g.weight() * g.weight();
        let want = kin + 0.5 * q;
        let e = total_energy(&s, Some(&pot));
        assert!((e - want).abs() <= 1e-9 * want.abs());
    }

    #[test]
    fn energy_matches_lattice_quadrature() {
        let g = grid(1, 24, 8.0);
        let pot = Potential::new(&g, &Profile::Bump, 4.0, 0.0, 0.9).unwrap();
        let s = mixed_state(&g, 0.3, 4.0, 0.5);
        let n = g.n();
        let w = g.weight();
        let vt = pot.diff_table();
        let gd = s.gamma.data();
        let ld = s.lambda.data();
        let rho = real_parts(&s.gamma.diagonal());
        let p2: Vec<f64> = s.phi.data().iter().map(|z| z.norm_sqr()).collect();
        let mut inter = 0.0;
        for x in 0..n {
            for y in 0..n {
                let v = vt[(x + n - y) % n];
                let pair = gd[x * n + y].norm_sqr() + ld[x * n + y].norm_sqr();
                inter += v * (0.5 * pair + 0.5 * rho[x] * rho[y] - p2[x] * p2[y]);
            }
        }
        inter *= w * w;
        let kin = real_parts(&kinetic_density(&s)).iter().sum::<f64>() * w;
        let want = kin + inter;
        let e = total_energy(&s, Some(&pot));
        assert!((e - want).abs() <= tol::RHS_ORACLE * want.abs().max(1.0));
    }

    #[test]
    fn kinetic_density_matches_eigenfunction_gradients() {
        let g = grid(1, 32, 8.0);
        let f1 = gaussian_packet(&g, &[0.5], &[1], 0.9).unwrap();
        let f2 = gaussian_packet(&g, &[-1.0], &[2], 1.4).unwrap();
        let mut gam = Kernel::outer(&f1.conj(), &f1);
        gam.scale(C::new(0.7, 0.0));
        gam.add_scaled_outer(C::new(0.3, 0.0), &f2.conj(), &f2);
        gam.tag_unchecked(KernelSymmetry::Hermitian);
        let s = kernel_state(&g, gam);
        let deriv = |f: &Field<f64>| {
            let gg = g.clone();
            let mut out = f.clone();
            out.filter_spectrum(|flat| C::new(0.0, gg.freq(flat)));
            out
        };
        let (d1, d2) = (deriv(&f1), deriv(&f2));
        let want: Vec<f64> = d1
            .data()
            .iter()
            .zip(d2.data())
            .map(|(a, b)| 0.7 * a.norm_sqr() + 0.3 * b.norm_sqr())
            .collect();
        let got = real_parts(&kinetic_density(&s));
        let scale = want.iter().cloned().fold(0.0, f64::max);
        assert!(sup_gap(&got, &want) <= 1e-11 * scale);
    }

    #[test]
    fn kinetic_density_integrates_to_free_energy() {
        let g = grid(1, 32, 8.0);
        let s = mixed_state(&g, 0.25, 8.0, 0.5);
        let total = real_parts(&kinetic_density(&s)).iter().sum::<f64>() * g.weight();
        let e = total_energy(&s, None);
        assert!((total - e).abs() <= tol::TRACE_ORACLE * e.abs().max(1.0));
    }

    #[test]
    fn kinetic_density_floor_and_realness() {
        let g = grid(1, 32, 8.0);
        let s = mixed_state(&g, 0.25, 8.0, 0.5);
        let ek = kinetic_density(&s);
        let scale = ek.sup_norm();
        let min = ek.data().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let imag = ek.data().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(min >= tol::KINETIC_FLOOR * scale.max(1.0));
        assert!(imag <= 1e-12 * scale);
    }

    #[test]
    fn plane_wave_current_is_wavenumber_times_density() {
        let g = grid(1, 32, 8.0);
        let (s, kf) = plane_wave_state(&g, 3);
        let p = momentum_density(&s);
        let dens = 1.0 / g.edge();
        let want = vec![kf * dens; g.n()];
        assert!(sup_gap(&real_parts(&p[0]), &want) <= 1e-12 * kf * dens);
    }

    #[test]
    fn current_matches_naive_transform() {
        let g = grid(1, 8, 4.0);
        // Hermitian kernel from two deterministic band-limited fields; modes
        // strictly below Nyquist so derivative and conjugation commute.
        let mk = |seed: f64| {
            let data: Vec<C> = (0..8)
                .map(|i| {
                    let x = g.h() * i as f64;
                    let mut z = C::new(0.0, 0.0);
                    for m in -2..=2i64 {
                        let km = 2.0 * PI * m as f64 / g.edge();
                        let amp = 0.5 + 0.2 * m as f64;
                        z += cis(km * x + seed * m as f64).scale(amp);
                    }
                    z
                })
                .collect();
            Field::from_data(&g, data).unwrap()
        };
        let (f1, f2) = (mk(0.9), mk(1.7));
        let mut gam = Kernel::outer(&f1.conj(), &f1);
        gam.scale(C::new(0.6, 0.0));
        gam.add_scaled_outer(C::new(0.4, 0.0), &f2.conj(), &f2);
        gam.tag_unchecked(KernelSymmetry::Hermitian);
        let s = kernel_state(&g, gam);
        let got = momentum_density(&s);
        let dcol = naive_arg_derivative(&s.gamma, &g, true);
        let drow = naive_arg_derivative(&s.gamma, &g, false);
        let want: Vec<f64> = (0..8)
            .map(|x| ((dcol[x * 8 + x] - drow[x * 8 + x]) * C::new(0.0, -0.5)).re)
            .collect();
        let scale = want.iter().map(|v| v.abs()).fold(1.0, f64::max);
        assert!(sup_gap(&real_parts(&got[0]), &want) <= 1e-10 * scale);
        let imag = got[0].data().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(imag <= 1e-12 * scale);
    }

    #[test]
    fn trig_state_stress_matches_closed_form() {
        let g = grid(2, 8, 4.0);
        let modes: [(i64, i64, C); 3] =
            [(1, 0, C::new(0.8, 0.0)), (0, 1, C::new(0.5, 0.3)), (-1, 1, C::new(0.0, -0.4))];
        let kv = |m: i64| 2.0 * PI * m as f64 / g.edge();
        let mut idx = [0usize; 3];
        let at = |flat: usize, g: &Grid<f64>, idx: &mut [usize; 3]| {
            g.decompose(flat, 2, &mut idx[..2]);
            (idx[0] as f64 * g.h(), idx[1] as f64 * g.h())
        };
        let p = g.points();
        let mut data = vec![C::new(0.0, 0.0); p];
        for (flat, z) in data.iter_mut().enumerate() {
            let (x0, x1) = at(flat, &g, &mut idx);
            for (m0, m1, c) in modes {
                *z += c * cis(kv(m0) * x0 + kv(m1) * x1);
            }
        }
        let psi = Field::from_data(&g, data).unwrap();
        let mut gam = Kernel::outer(&psi.conj(), &psi);
        gam.tag_unchecked(KernelSymmetry::Hermitian);
        let s = kernel_state(&g, gam);
        let sp = stress_and_pressure(&s, None);
        // Closed-form gradients and density Laplacian from the mode sums.
        let mut dpsi = [vec![C::new(0.0, 0.0); p], vec![C::new(0.0, 0.0); p]];
        let mut lap_rho = vec![0.0; p];
        for flat in 0..p {
            let (x0, x1) = at(flat, &g, &mut idx);
            for (m0, m1, c) in modes {
                let ph = c * cis(kv(m0) * x0 + kv(m1) * x1);
                dpsi[0][flat] += ph * C::new(0.0, kv(m0));
                dpsi[1][flat] += ph * C::new(0.0, kv(m1));
            }
            for (a0, a1, ca) in modes {
                for (b0, b1, cb) in modes {
                    let dk = [kv(b0) - kv(a0), kv(b1) - kv(a1)];
                    let ph = ca.conj() * cb * cis(dk[0] * x0 + dk[1] * x1);
                    lap_rho[flat] -= (dk[0] * dk[0] + dk[1] * dk[1]) * ph.re;
                }
            }
        }
        for j in 0..2 {
            for k in 0..2 {
                let want: Vec<f64> = (0..p)
                    .map(|i| 2.0 * (dpsi[j][i].conj() * dpsi[k][i]).re)
                    .collect();
                let got = real_parts(&sp.sigma[j * 2 + k]);
                let scale = want.iter().map(|v| v.abs()).fold(1.0, f64::max);
                assert!(sup_gap(&got, &want) <= 1e-10 * scale, "component {j}{k}");
            }
        }
        let want_p: Vec<f64> = lap_rho.iter().map(|v| -0.5 * v).collect();
        let scale = want_p.iter().map(|v| v.abs()).fold(1.0, f64::max);
        assert!(sup_gap(&real_parts(&sp.pressure), &want_p) <= 1e-10 * scale);
    }

    #[test]
    fn stress_is_symmetric_and_real() {
        let g = grid(2, 12, 6.0);
        let s = kernel_state(&g, packet_mixture(&g));
        let sp = stress_and_pressure(&s, None);
        let scale = sp.sigma.iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
        for j in 0..2 {
            for k in 0..2 {
                let a = &sp.sigma[j * 2 + k];
                let b = &sp.sigma[k * 2 + j];
                assert!(sup_gap(&real_parts(a), &real_parts(b)) <= tol::STRESS_SYMMETRY * scale);
                let imag = a.data().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
                assert!(imag <= tol::STRESS_SYMMETRY * scale);
            }
        }
    }

    #[test]
    fn stress_two_by_two_minors_nonnegative() {
        let g = grid(2, 12, 6.0);
        let s = kernel_state(&g, packet_mixture(&g));
        let sp = stress_and_pressure(&s, None);
        let s00 = real_parts(&sp.sigma[0]);
        let s01 = real_parts(&sp.sigma[1]);
        let s11 = real_parts(&sp.sigma[3]);
        let scale = sp.sigma.iter().map(|f| f.sup_norm()).fold(1.0, f64::max);
        for i in 0..g.points() {
            assert!(s00[i] >= tol::STRESS_PSD * -scale);
            assert!(s11[i] >= tol::STRESS_PSD * -scale);
            let det = s00[i] * s11[i] - s01[i] * s01[i];
            assert!(det >= tol::STRESS_PSD * -scale * scale);
        }
    }

    #[test]
    fn uniform_condensate_pressure_is_half_interaction_mass() {
        let g = grid(1, 32, 8.0);
        let pot = Potential::new(&g, &Profile::Bump, 1.0, 0.0, 0.7).unwrap();
        let dens = 1.0 / g.edge();
        let phi =
            Field::from_data(&g, vec![C::new(dens.sqrt(), 0.0); g.n()]).unwrap();
        let s = HfbState::pure_condensate(phi, 8.0, 0.5).unwrap();
        let sp = stress_and_pressure(&s, Some(&pot));
        let want = 0.5 * dens * dens * pot.lattice_mass();
        let got = real_parts(&sp.pressure);
        assert!(sup_gap(&got, &vec![want; g.n()]) <= 1e-12 * want);
    }

    #[test]
    fn interaction_force_absent_without_potential() {
        let g = grid(1, 16, 8.0);
        let s = mixed_state(&g, 0.2, 8.0, 0.5);
        let f = interaction_force(&s, None);
        assert_eq!(f.len(), 1);
        assert!(f[0].sup_norm() == 0.0);
    }

    #[test]
    fn uniform_state_feels_no_force() {
        let g = grid(1, 32, 8.0);
        let pot = Potential::new(&g, &Profile::Bump, 1.0, 0.0, 0.7).unwrap();
        let dens = 1.0 / g.edge();
        let phi =
            Field::from_data(&g, vec![C::new(dens.sqrt(), 0.0); g.n()]).unwrap();
        let s = HfbState::pure_condensate(phi, 8.0, 0.5).unwrap();
        let f = interaction_force(&s, Some(&pot));
        assert!(f[0].sup_norm() <= 1e-14 * dens * dens);
    }

    #[test]
    fn interaction_force_matches_naive_quadrature() {
        let g = grid(1, 12, 6.0);
        let pot = Potential::new(&g, &Profile::Bump, 4.0, 0.0, 0.8).unwrap();
        let s = mixed_state(&g, 0.25, 4.0, 0.5);
        let got = interaction_force(&s, Some(&pot));
        let n = g.n();
        let pair = pair_diagonal(&s);
        let fk = Kernel::from_data(
            &g,
            KernelSymmetry::Symmetric,
            pair.iter().map(|&r| C::new(r, 0.0)).collect(),
        )
        .unwrap();
        let dy = naive_arg_derivative(&fk, &g, true);
        let dx = naive_arg_derivative(&fk, &g, false);
        let vt = pot.diff_table();
        let want: Vec<f64> = (0..n)
            .map(|x| {
                let mut acc = C::new(0.0, 0.0);
                for y in 0..n {
                    acc += (dy[x * n + y] - dx[x * n + y]).scale(vt[(x + n - y) % n]);
                }
                0.5 * g.weight() * acc.re
            })
            .collect();
        let scale = want.iter().map(|v| v.abs()).fold(1e-30, f64::max);
        assert!(sup_gap(&real_parts(&got[0]), &want) <= 1e-10 * scale);
    }

    #[test]
    fn continuity_needs_three_snapshots() {
        let g = grid(1, 16, 8.0);
        let s = mixed_state(&g, 0.2, 8.0, 0.5);
        let traj = evolve(&s, None, 1e-3, 1e-3, 1).unwrap();
        assert_eq!(traj.snapshots.len(), 2);
        assert!(matches!(
            continuity_residual(&traj, None),
            Err(CoreError::InvalidArgument { .. })
        ));
    }

    #[test]
    fn free_superposition_residuals_are_time_discretization() {
        let g = grid(1, 32, 8.0);
        let k1 = 2.0 * PI / g.edge();
        let k2 = 2.0 * PI * 2.0 / g.edge();
        let data: Vec<C> = (0..g.n())
            .map(|i| cis(k1 * g.h() * i as f64) + cis(k2 * g.h() * i as f64))
            .collect();
        let mut phi = Field::from_data(&g, data).unwrap();
        let nrm = phi.norm();
        phi.scale(C::new(1.0 / nrm, 0.0));
        let s = HfbState::pure_condensate(phi, 8.0, 0.5).unwrap();
        let run = |dt: f64| {
            let traj = evolve(&s, None, 8.0 * dt, dt, 1).unwrap();
            continuity_residual(&traj, None).unwrap()
        };
        let dt = 2e-3;
        let (mass_c, mom_c) = run(dt);
        let (mass_f, mom_f) = run(dt / 2.0);
        // Residual at the shared interior time 2 dt.
        let rm = mass_c[1] / mass_f[3];
        let rp = mom_c[1] / mom_f[3];
        assert!((rm - 4.0).abs() <= 0.1, "mass ratio {rm}");
        assert!((rp - 4.0).abs() <= 0.1, "momentum ratio {rp}");
    }

    #[test]
    fn interacting_residuals_shrink_second_order() {
        let g = grid(1, 32, 8.0);
        let pot = Potential::new(&g, &Profile::Bump, 8.0, 0.0, 0.8).unwrap();
        let s = mixed_state(&g, 0.2, 8.0, 0.5);
        let run = |dt: f64| {
            let traj = evolve(&s, Some(&pot), 8.0 * dt, dt, 1).unwrap();
            continuity_residual(&traj, Some(&pot)).unwrap()
        };
        let dt = 2e-3;
        let (mass_c, mom_c) = run(dt);
        let (mass_f, mom_f) = run(dt / 2.0);
        let rm = mass_c[1] / mass_f[3];
        let rp = mom_c[1] / mom_f[3];
        assert!((rm - 4.0).abs() <= 0.8, "mass ratio {rm}");
        assert!((rp - 4.0).abs() <= 0.8, "momentum ratio {rp}");
    }

    #[test]
    fn virial_weight_needs_resolved_mollifier() {
        let g = grid(1, 16, 8.0);
        let s = mixed_state(&g, 0.2, 8.0, 0.5);
        assert!(matches!(
            morawetz_action(&s, 0.9),
            Err(CoreError::ResolutionGuard { .. })
        ));
    }

    #[test]
    fn resting_condensate_has_zero_virial_action() {
        let g = grid(1, 32, 8.0);
        let phi = gaussian_packet(&g, &[0.0], &[0], 1.1).unwrap();
        let s = HfbState::pure_condensate(phi, 8.0, 0.5).unwrap();
        let m = morawetz_action(&s, 1.0).unwrap();
        assert!(m.abs() <= 1e-13);
    }

    #[test]
    fn even_state_virial_action_vanishes() {
        let g = grid(1, 32, 8.0);
        let phi = gaussian_packet(&g, &[0.0], &[2], 1.1).unwrap();
        let s = HfbState::pure_condensate(phi, 8.0, 0.5).unwrap();
        let rho = s.gamma.diagonal();
        let mom = momentum_density(&s);
        let scale = 4.0 * rho.l1_norm() * mom[0].l1_norm();
        let m = morawetz_action(&s, 1.0).unwrap();
        assert!(m.abs() <= 1e-12 * scale);
    }

    #[test]
    fn virial_action_matches_direct_double_sum() {
        let g = grid(1, 12, 6.0);
        let s = mixed_state(&g, 0.25, 8.0, 0.5);
        let eps = 1.2;
        let got = morawetz_action(&s, eps).unwrap();
        let grad = naive_symbol_table(&radius_table(&g, eps), &g, |k| C::new(0.0, k));
        let rho = real_parts(&s.gamma.diagonal());
        let p = real_parts(&momentum_density(&s)[0]);
        let n = g.n();
        let mut want = 0.0;
        for x in 0..n {
            for y in 0..n {
                want += grad[(x + n - y) % n] * (p[x] * rho[y] - rho[x] * p[y]);
            }
        }
        want *= 2.0 * g.weight() * g.weight();
        assert!((got - want).abs() <= 1e-10 * want.abs().max(1e-12));
    }

    #[test]
    fn virial_action_obeys_l1_bound() {
        let g = grid(1, 32, 8.0);
        let s = mixed_state(&g, 0.25, 8.0, 0.5);
        let rho = s.gamma.diagonal();
        let mom = momentum_density(&s);
        let bound = 4.2 * rho.l1_norm() * mom[0].l1_norm();
        let m = morawetz_action(&s, 1.0).unwrap();
        assert!(m.abs() <= bound);
    }

    #[test]
    fn rate_terms_vanish_without_interaction() {
        let g = grid(1, 16, 8.0);
        let s = mixed_state(&g, 0.2, 8.0, 0.5);
        let terms = morawetz_rate_terms(&s, None, 1.5).unwrap();
        assert_eq!(terms[1], 0.0);
        assert_eq!(terms[3], 0.0);
    }

    #[test]
    fn hessian_term_matches_direct_double_sum() {
        let g = grid(1, 12, 6.0);
        let s = mixed_state(&g, 0.25, 8.0, 0.5);
        let eps = 1.2;
        let terms = morawetz_rate_terms(&s, None, eps).unwrap();
        let hess = naive_symbol_table(&radius_table(&g, eps), &g, |k| C::new(-k * k, 0.0));
        let rho = real_parts(&s.gamma.diagonal());
        let p = real_parts(&momentum_density(&s)[0]);
        let sig = real_parts(&stress_and_pressure(&s, None).sigma[0]);
        let n = g.n();
        let mut want = 0.0;
        for x in 0..n {
            for y in 0..n {
                want += hess[(x + n - y) % n]
                    * (sig[x] * rho[y] + rho[x] * sig[y] - 4.0 * p[x] * p[y]);
            }
        }
        want *= 2.0 * g.weight() * g.weight();
        assert!((terms[2] - want).abs() <= 1e-10 * want.abs().max(1e-12));
    }

    #[test]
    fn rate_terms_sum_to_action_derivative() {
        let g = grid(1, 16, 8.0);
        let pot = Potential::new(&g, &Profile::Bump, 8.0, 0.0, 0.8).unwrap();
        let s = mixed_state(&g, 0.2, 8.0, 0.5);
        let eps = 1.5;
        let dt = 1e-3;
        let traj = evolve(&s, Some(&pot), 4.0 * dt, dt, 1).unwrap();
        let m: Vec<f64> =
            traj.snapshots.iter().map(|s| morawetz_action(s, eps).unwrap()).collect();
        for j in 1..traj.snapshots.len() - 1 {
            let rate = (m[j + 1] - m[j - 1]) / (2.0 * dt);
            let terms = morawetz_rate_terms(&traj.snapshots[j], Some(&pot), eps).unwrap();
            let total: f64 = terms.iter().sum();
            assert!(
                (rate - total).abs() <= tol::MORAWETZ_IDENTITY * total.abs(),
                "snapshot {j}: rate {rate:.6e} vs terms {total:.6e}"
            );
        }
    }

    #[test]
    fn bilaplacian_table_pairs_like_closed_form() {
        let g = grid(1, 128, 16.0);
        let eps = 0.5;
        // Concentrated density, so the pairing never sees the seam.
        let rho_data: Vec<C> = (0..g.n())
            .map(|i| {
                let u = g.displacement(i);
                C::new((-u * u / 2.0).exp(), 0.0)
            })
            .collect();
        let rho = Field::from_data(&g, rho_data).unwrap();
        let w = pair_weight(&g, eps).unwrap();
        let got = convolution_pairing(&g, &rho, &w.neg_bilap_hat, &rho);
        // Closed-form kernel -(d^4/du^4) sqrt(u^2 + eps^2), paired through
        // the same circular convolution.
        let table: Vec<C> = (0..g.n())
            .map(|i| {
                let u = g.displacement(i);
                let a2 = u * u + eps * eps;
                let k = 3.0 * eps * eps * (eps * eps - 4.0 * u * u) / a2.powf(3.5);
                C::new(k, 0.0)
            })
            .collect();
        let mut that = table;
        g.fft_all(&mut that, 1, true);
        let want = convolution_pairing(&g, &rho, &that, &rho);
        assert!((got - want).abs() <= 1e-3 * want.abs());
    }

    #[test]
    fn bilaplacian_pairing_concentrates_to_delta() {
        let g = grid(3, 32, 16.0);
        let width = 1.5;
        let rho_data: Vec<C> = {
            let mut idx = [0usize; 3];
            (0..g.points())
                .map(|flat| {
                    g.decompose(flat, 3, &mut idx);
                    let mut r2 = 0.0;
                    for a in 0..3 {
                        let u = g.displacement(idx[a]);
                        r2 += u * u;
                    }
                    C::new((-r2 / (2.0 * width * width)).exp(), 0.0)
                })
                .collect()
        };
        let rho = Field::from_data(&g, rho_data).unwrap();
        let target =
            8.0 * PI * rho.data().iter().map(|z| z.re * z.re).sum::<f64>() * g.weight();
        // Closed-form kernel mass: 15 eps^4 / a^7 integrates to 8 pi.
        let eps0 = 1.0;
        let mut idx = [0usize; 3];
        let mass: f64 = (0..g.points())
            .map(|flat| {
                g.decompose(flat, 3, &mut idx);
                let mut r2 = eps0 * eps0;
                for a in 0..3 {
                    let u = g.displacement(idx[a]);
                    r2 += u * u;
                }
                15.0 * eps0.powi(4) / r2.powf(3.5)
            })
            .sum::<f64>()
            * g.weight();
        assert!((mass - 8.0 * PI).abs() <= 0.01 * 8.0 * PI, "kernel mass {mass}");
        // The pairing is nonnegative and extrapolates to the delta limit
        // quadratically in eps.
        let pairing = |eps: f64| {
            let w = pair_weight(&g, eps).unwrap();
            convolution_pairing(&g, &rho, &w.neg_bilap_hat, &rho)
        };
        let (t1, t2) = (pairing(1.0), pairing(1.25));
        assert!(t1 >= 0.0 && t2 >= 0.0);
        let extrapolated = (1.5625 * t1 - t2) / 0.5625;
        assert!(
            (extrapolated - target).abs() <= tol::EIGHT_PI_REL * target,
            "extrapolated {extrapolated:.4e} target {target:.4e}"
        );
    }

    #[test]
    fn schwarz_defect_vanishes_on_rank_one() {
        let g = grid(1, 32, 8.0);
        let phi = gaussian_packet(&g, &[0.3], &[2], 1.0).unwrap();
        let s = HfbState::pure_condensate(phi, 8.0, 0.5).unwrap();
        let rho = s.gamma.diagonal();
        let scale = rho.sup_norm();
        let (d0, d1) = cauchy_schwarz_defect(&s);
        assert!(d0.abs() <= 1e-12 * scale * scale);
        assert!(d1.abs() <= 1e-12 * scale);
    }

    #[test]
    fn schwarz_defect_stays_at_roundoff_on_quasifree() {
        let g = grid(1, 32, 8.0);
        let s = mixed_state(&g, 0.25, 8.0, 0.5);
        let rho = s.gamma.diagonal();
        let ek = kinetic_density(&s);
        let (d0, d1) = cauchy_schwarz_defect(&s);
        let s0 = rho.sup_norm() * rho.sup_norm();
        let s1 = ek.sup_norm() * rho.sup_norm();
        assert!(d0 <= tol::CS_DEFECT * s0.max(1.0), "d0 {d0}");
        assert!(d1 <= tol::CS_DEFECT * s1.max(1.0), "d1 {d1}");
    }

    #[test]
    fn schwarz_defect_detects_planted_violation() {
        let g = grid(1, 32, 8.0);
        let s = mixed_state(&g, 0.25, 8.0, 0.5);
        let mut broken = s.clone();
        let scale = broken.gamma.diagonal().sup_norm();
        let bump = C::new(scale, 0.0);
        let p = g.points();
        broken.gamma.data_mut()[3 * p + 20] += bump;
        broken.gamma.data_mut()[20 * p + 3] += bump.conj();
        let (d0, _) = cauchy_schwarz_defect(&broken);
        assert!(d0 > 0.1 * scale * scale, "planted violation missed: {d0}");
    }
}
