//! The coupled evolution system for (phi, Lambda, Gamma) and its symmetric
//! split-step integrator.
//!
//! With c = V_N * rho (rho the Gamma diagonal) and b = V_N * |phi|^2, the
//! nonlinear right sides are, in operator form
//! (o = h^d-weighted composition, (V.K)(x,y) = V_N(x-y) K(x,y)):
//!
//!   R_phi    = -c phi - (V.Gamma)^T phi - (V.Lambda) conj(phi) + 2 b phi,
//!   R_Lambda = -(c(x)+c(y)) Lambda - (S + S^T)
//!              + 2 (b(x)+b(y)) phi(x) phi(y),
//!       with S = (V.Lambda) o Gamma + Lambda o (V.Gamma),
//!   R_Gamma  = (A - A*) + (B - B*) + (c(x)-c(y)) Gamma
//!              - 2 (b(x)-b(y)) conj(phi)(x) phi(y),
//!       with A = (V.Gamma) o Gamma, B = (V.conj(Lambda)) o Lambda.
//!
//! The adjoint forms A*, B*, S^T stand in for the second set of
//! y-contractions; the identities behind them use the Hermitian symmetry of
//! Gamma and the symmetry of Lambda, which `collision_bv` cross-checks by
//! assembling the same right side literally, without any symmetry use.
//!
//! Each channel evolves by d/dt u = i (L u + R u) with linear parts
//! L_phi = Laplacian, L_Lambda = Laplacian_x + Laplacian_y - (1/N) V_N,
//! L_Gamma = Laplacian_y - Laplacian_x. One step of size dt is the
//! palindromic composition R(dt/2) L(dt) R(dt/2), where L is the exact
//! spectral pair flow and each nonlinear half-step is one explicit midpoint
//! update, giving global second order and exact linear-flow reversibility.

use num_complex::Complex;
use rayon::prelude::*;

use crate::duhamel::{exchange_pair_propagate, pair_propagate};
use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::kernel::{Kernel, KernelSymmetry};
use crate::potential::Potential;
use crate::scalar::{cis, Scalar};
use crate::state::HfbState;
use crate::tol;

/// Nonlinear right sides of the three channels at a fixed time.
pub struct Rhs<T: Scalar> {
    pub phi: Field<T>,
    pub lambda: Kernel<T>,
    pub gamma: Kernel<T>,
}

/// Shared per-evaluation quantities: the two convolutions and the
/// difference-weighted kernels every channel draws from.
struct Work<T: Scalar> {
    c: Vec<T>,
    b: Vec<T>,
    /// (V.Lambda)(x,y) = V_N(x-y) Lambda(x,y).
    wl: Kernel<T>,
    /// (V.Gamma)(x,y) = V_N(x-y) Gamma(x,y).
    wg: Kernel<T>,
}

fn check_pot_grid<T: Scalar>(s: &HfbState<T>, pot: &Potential<T>) -> Result<()> {
    if s.grid() != pot.grid() {
        return Err(CoreError::ShapeMismatch { what: "state and potential grids" });
    }
    Ok(())
}

fn real_parts<T: Scalar>(f: &Field<T>) -> Vec<T> {
    f.data().iter().map(|z| z.re).collect()
}

impl<T: Scalar> Work<T> {
    fn new(s: &HfbState<T>, pot: &Potential<T>) -> Self {
        let g = s.grid();
        let c = real_parts(&pot.convolve(&s.gamma.diagonal()));
        let sq = Field::from_data(
            g,
            s.phi.data().iter().map(|z| Complex::new(z.norm_sqr(), T::zero())).collect(),
        )
        .expect("|phi|^2 has the field's own length");
        let b = real_parts(&pot.convolve(&sq));
        let (wl, wg) = rayon::join(
            || {
                let mut wl = s.lambda.clone();
                wl.weight_by_difference(pot.diff_table());
                wl
            },
            || {
                let mut wg = s.gamma.clone();
                wg.weight_by_difference(pot.diff_table());
                wg
            },
        );
        Work { c, b, wl, wg }
    }
}

/// out(x,y) += alpha (w(x) + col_sign w(y)) base(x,y).
fn add_pair_weighted<T: Scalar>(
    out: &mut Kernel<T>,
    base: &Kernel<T>,
    w: &[T],
    col_sign: T,
    alpha: T,
) {
    let p = out.rows();
    debug_assert_eq!(base.rows(), p);
    let bd = base.data();
    out.data_mut()
        .par_chunks_mut(p)
        .enumerate()
        .for_each(|(x, row)| {
            let wx = w[x];
            let base_row = &bd[x * p..(x + 1) * p];
            for ((y, z), v) in row.iter_mut().enumerate().zip(base_row) {
                *z += v.scale(alpha * (wx + col_sign * w[y]));
            }
        });
}

/// out(x,y) += alpha (w(x) + col_sign w(y)) a(x) b(y).
fn add_pair_weighted_outer<T: Scalar>(
    out: &mut Kernel<T>,
    a: &Field<T>,
    b: &Field<T>,
    w: &[T],
    col_sign: T,
    alpha: T,
) {
    let p = out.rows();
    let ad = a.data();
    let bd = b.data();
    out.data_mut()
        .par_chunks_mut(p)
        .enumerate()
        .for_each(|(x, row)| {
            let wx = w[x];
            let ax = ad[x];
            for ((y, z), v) in row.iter_mut().enumerate().zip(bd) {
                *z += (ax * v).scale(alpha * (wx + col_sign * w[y]));
            }
        });
}

fn phi_from_work<T: Scalar>(s: &HfbState<T>, work: &Work<T>) -> Field<T> {
    let one = Complex::new(T::one(), T::zero());
    let t1 = work.wg.transpose().apply(&s.phi);
    let t2 = work.wl.apply(&s.phi.conj());
    let mut out = Field::zero(s.grid());
    for (i, z) in out.data_mut().iter_mut().enumerate() {
        *z = s.phi.data()[i].scale(T::of(2.0) * work.b[i] - work.c[i]);
    }
    out.axpy(-one, &t1);
    out.axpy(-one, &t2);
    out
}

fn lambda_from_work<T: Scalar>(s: &HfbState<T>, work: &Work<T>) -> Result<Kernel<T>> {
    let one = Complex::new(T::one(), T::zero());
    let (m1, m2) = rayon::join(|| work.wl.compose(&s.gamma), || s.lambda.compose(&work.wg));
    let mut sum = m1;
    sum.axpy(one, &m2);
    let mut out = sum.transpose();
    out.axpy(one, &sum);
    out.scale(-one);
    add_pair_weighted(&mut out, &s.lambda, &work.c, T::one(), -T::one());
    add_pair_weighted_outer(&mut out, &s.phi, &s.phi, &work.b, T::one(), T::of(2.0));
    out.retag(KernelSymmetry::Symmetric)?;
    Ok(out)
}

fn gamma_from_work<T: Scalar>(s: &HfbState<T>, work: &Work<T>) -> Result<Kernel<T>> {
    let one = Complex::new(T::one(), T::zero());
    let (a, b) = rayon::join(
        || work.wg.compose(&s.gamma),
        || work.wl.conj().compose(&s.lambda),
    );
    let mut out = a.adjoint();
    out.axpy(one, &b.adjoint());
    out.scale(-one);
    out.axpy(one, &a);
    out.axpy(one, &b);
    add_pair_weighted(&mut out, &s.gamma, &work.c, -T::one(), T::one());
    add_pair_weighted_outer(&mut out, &s.phi.conj(), &s.phi, &work.b, -T::one(), -T::of(2.0));
    check_collision_shape(&out)?;
    Ok(out)
}

/// The Gamma right side must be anti-Hermitian with a vanishing diagonal;
/// both are what the trace (particle number) conservation rests on.
fn check_collision_shape<T: Scalar>(k: &Kernel<T>) -> Result<()> {
    let p = k.rows();
    let d = k.data();
    let mut defect = T::zero();
    let mut diag = T::zero();
    let mut scale = T::one();
    for x in 0..p {
        diag = diag.max((d[x * p + x].re.rabs()).max(d[x * p + x].im.rabs()));
        for y in x..p {
            let z = d[x * p + y] + d[y * p + x].conj();
            defect = defect.max(z.re.rabs().max(z.im.rabs()));
            let m = d[x * p + y].re.rabs().max(d[x * p + y].im.rabs());
            scale = scale.max(m);
        }
    }
    if defect > T::of(tol::SYMMETRY) * scale {
        return Err(CoreError::SymmetryDefect {
            tag: "collision (anti-hermitian part)",
            defect: (defect / scale).as_f64(),
            tol: tol::SYMMETRY,
        });
    }
    if diag > T::of(tol::HERMITIAN_DIAG) * scale {
        return Err(CoreError::SymmetryDefect {
            tag: "collision diagonal",
            defect: (diag / scale).as_f64(),
            tol: tol::HERMITIAN_DIAG,
        });
    }
    Ok(())
}

/// Condensate right side. A zero interaction (pot = None) returns zero.
pub fn rhs_phi<T: Scalar>(s: &HfbState<T>, pot: Option<&Potential<T>>) -> Result<Field<T>> {
    match pot {
        None => Ok(Field::zero(s.grid())),
        Some(p) => {
            check_pot_grid(s, p)?;
            Ok(phi_from_work(s, &Work::new(s, p)))
        }
    }
}

/// Pair-kernel right side, symmetric-tagged; the linear (1/N) V_N term
/// belongs to the propagator and is not included here.
pub fn rhs_lambda<T: Scalar>(s: &HfbState<T>, pot: Option<&Potential<T>>) -> Result<Kernel<T>> {
    match pot {
        None => Ok(Kernel::zero(s.grid(), KernelSymmetry::Symmetric)),
        Some(p) => {
            check_pot_grid(s, p)?;
            lambda_from_work(s, &Work::new(s, p))
        }
    }
}

/// Density-kernel right side (the collision form), anti-Hermitian with a
/// vanishing diagonal.
pub fn rhs_gamma<T: Scalar>(s: &HfbState<T>, pot: Option<&Potential<T>>) -> Result<Kernel<T>> {
    match pot {
        None => Ok(Kernel::zero(s.grid(), KernelSymmetry::None)),
        Some(p) => {
            check_pot_grid(s, p)?;
            gamma_from_work(s, &Work::new(s, p))
        }
    }
}

/// The same Gamma right side assembled literally as B+ - B- from the
/// quadratic form
///
///   l(x,y;x',y') = Gamma(x;x')Gamma(y;y') + Gamma(x;y')Gamma(y;x')
///                + conj(Lambda)(x,y)Lambda(x',y')
///                - 2 conj(phi)(x)conj(phi)(y)phi(x')phi(y'),
///
/// with B+(x;x') = int dy V_N(x-y) l(x,y;x',y) and B- the same with
/// V_N(x'-y). Every contraction is formed directly (explicit transposes and
/// conjugates, no symmetry shortcuts), so agreement with `rhs_gamma` is a
/// genuine cross-check of the adjoint identities used there.
pub fn collision_bv<T: Scalar>(s: &HfbState<T>, pot: Option<&Potential<T>>) -> Result<Kernel<T>> {
    let pot = match pot {
        None => return Ok(Kernel::zero(s.grid(), KernelSymmetry::None)),
        Some(p) => p,
    };
    check_pot_grid(s, pot)?;
    let one = Complex::new(T::one(), T::zero());
    let g = s.grid();
    let c = real_parts(&pot.convolve(&s.gamma.diagonal()));
    let sq = Field::from_data(
        g,
        s.phi.data().iter().map(|z| Complex::new(z.norm_sqr(), T::zero())).collect(),
    )
    .expect("|phi|^2 has the field's own length");
    let b = real_parts(&pot.convolve(&sq));
    let mut wg = s.gamma.clone();
    wg.weight_by_difference(pot.diff_table());
    let mut wl = s.lambda.clone();
    wl.weight_by_difference(pot.diff_table());
    let wlc = wl.conj();
    let lbar = s.lambda.conj();
    let lt = s.lambda.transpose();
    let wlt = wl.transpose();

    // B+ = c(x) Gamma + (V.Gamma) o Gamma + (V.conj Lambda) o Lambda^T
    //      - 2 outer(b conj(phi), phi).
    let mut bplus = wg.compose(&s.gamma);
    bplus.axpy(one, &wlc.compose(&lt));
    add_pair_weighted(&mut bplus, &s.gamma, &c, T::zero(), T::one());
    let mut bphi = s.phi.conj();
    for (z, w) in bphi.data_mut().iter_mut().zip(&b) {
        *z = z.scale(*w);
    }
    bplus.add_scaled_outer(-Complex::new(T::of(2.0), T::zero()), &bphi, &s.phi);

    // B- = c(x') Gamma + Gamma o (V.Gamma) + conj(Lambda) o (V.Lambda)^T
    //      - 2 outer(conj(phi), b phi).
    let mut bminus = s.gamma.compose(&wg);
    bminus.axpy(one, &lbar.compose(&wlt));
    // c(x') weight: column weight only.
    {
        let p = bminus.rows();
        let gd = s.gamma.data();
        bminus
            .data_mut()
            .par_chunks_mut(p)
            .enumerate()
            .for_each(|(x, row)| {
                for ((y, z), v) in row.iter_mut().enumerate().zip(&gd[x * p..(x + 1) * p]) {
                    *z += v.scale(c[y]);
                }
            });
    }
    let mut phib = s.phi.clone();
    for (z, w) in phib.data_mut().iter_mut().zip(&b) {
        *z = z.scale(*w);
    }
    bminus.add_scaled_outer(-Complex::new(T::of(2.0), T::zero()), &s.phi.conj(), &phib);

    bplus.axpy(-one, &bminus);
    Ok(bplus)
}

/// All three right sides with the convolutions and difference-weighted
/// kernels computed once.
pub fn rhs_all<T: Scalar>(s: &HfbState<T>, pot: &Potential<T>) -> Result<Rhs<T>> {
    check_pot_grid(s, pot)?;
    let work = Work::new(s, pot);
    let phi = phi_from_work(s, &work);
    let (lambda, gamma) = rayon::join(|| lambda_from_work(s, &work), || gamma_from_work(s, &work));
    Ok(Rhs { phi, lambda: lambda?, gamma: gamma? })
}

/// s + i coef R, preserving symmetry tags (the Lambda increment is
/// symmetric, i R_Gamma is Hermitian).
fn advance<T: Scalar>(s: &HfbState<T>, r: &Rhs<T>, coef: T) -> HfbState<T> {
    let ic = Complex::new(T::zero(), coef);
    let mut out = s.clone();
    out.phi.axpy(ic, &r.phi);
    out.lambda.axpy(ic, &r.lambda);
    out.gamma.axpy(ic, &r.gamma);
    out
}

/// Explicit midpoint update over duration tau for the nonlinear part.
fn nonlinear_half<T: Scalar>(s: &HfbState<T>, pot: &Potential<T>, tau: T) -> Result<HfbState<T>> {
    let r1 = rhs_all(s, pot)?;
    let mid = advance(s, &r1, tau / T::of(2.0));
    let r2 = rhs_all(&mid, pot)?;
    Ok(advance(s, &r2, tau))
}

/// Exact spectral linear flow over dt on all three channels.
fn linear_full<T: Scalar>(s: &mut HfbState<T>, pot: Option<&Potential<T>>, dt: T) -> Result<()> {
    s.phi.free_propagate(dt);
    pair_propagate(&mut s.lambda, dt, pot)?;
    exchange_pair_propagate(&mut s.gamma, dt);
    Ok(())
}

/// One step R(dt/2) L(dt) R(dt/2) of the split integrator.
///
/// Guards: dt must be positive and satisfy dt * max|pair symbol| <= pi
/// (the pair symbol is w(k_x) + w(k_y), so the bound is 2 d w_max). After
/// the step the kernel tags are re-validated and the Gamma diagonal must
/// stay nonnegative to PSD slack; the full spectral positivity check runs
/// at snapshot cadence in `evolve`.
pub fn strang_step<T: Scalar>(
    s: &HfbState<T>,
    pot: Option<&Potential<T>>,
    dt: T,
) -> Result<HfbState<T>> {
    if !(dt > T::zero()) {
        return Err(CoreError::InvalidArgument {
            what: "step size",
            detail: "dt must be positive".into(),
        });
    }
    let g = s.grid();
    let wmax = g.freq_max() * g.freq_max() * T::of(g.dim() as f64);
    let value = dt * T::of(2.0) * wmax;
    if value > T::of(tol::STABILITY_LIMIT) {
        return Err(CoreError::StabilityGuard {
            value: value.as_f64(),
            limit: tol::STABILITY_LIMIT,
        });
    }
    let mut out = match pot {
        Some(p) => nonlinear_half(s, p, dt / T::of(2.0))?,
        None => s.clone(),
    };
    linear_full(&mut out, pot, dt)?;
    if let Some(p) = pot {
        out = nonlinear_half(&out, p, dt / T::of(2.0))?;
    }
    out.time = s.time + dt;
    out.lambda.validate()?;
    out.gamma.validate()?;
    let tr = out.gamma.trace().re;
    let floor = -T::of(tol::PSD_SCALE) * tr.max(T::one());
    let mut min_diag = T::zero();
    let p = out.gamma.rows();
    for x in 0..p {
        let v = out.gamma.data()[x * p + x].re;
        if v < min_diag {
            min_diag = v;
        }
    }
    if min_diag < floor {
        return Err(CoreError::PsdDefect {
            min_eig: min_diag.as_f64(),
            tol: (-floor).as_f64(),
        });
    }
    Ok(out)
}

/// A completed run: states at snapshot cadence (first entry is the initial
/// state, last is the final time), with the step and scheme that made them.
pub struct Trajectory<T: Scalar> {
    pub snapshots: Vec<HfbState<T>>,
    pub dt: T,
    pub cadence: usize,
    pub scheme: &'static str,
}

impl<T: Scalar> Trajectory<T> {
    pub fn last(&self) -> &HfbState<T> {
        self.snapshots.last().expect("a trajectory holds at least the initial state")
    }

    pub fn times(&self) -> Vec<T> {
        self.snapshots.iter().map(|s| s.time).collect()
    }
}

/// Integrate from s0 over `horizon` with step dt, recording every
/// `cadence`-th state (plus the initial and final ones). Snapshots are
/// fully validated, including the spectral positivity of Gamma. A zero
/// horizon returns the single validated initial state.
pub fn evolve<T: Scalar>(
    s0: &HfbState<T>,
    pot: Option<&Potential<T>>,
    horizon: T,
    dt: T,
    cadence: usize,
) -> Result<Trajectory<T>> {
    evolve_with(s0, pot, horizon, dt, cadence, &mut |_| Ok(()))
}

/// `evolve` with an observer called on every recorded snapshot.
pub fn evolve_with<T: Scalar>(
    s0: &HfbState<T>,
    pot: Option<&Potential<T>>,
    horizon: T,
    dt: T,
    cadence: usize,
    hook: &mut dyn FnMut(&HfbState<T>) -> Result<()>,
) -> Result<Trajectory<T>> {
    if cadence == 0 {
        return Err(CoreError::InvalidArgument {
            what: "snapshot cadence",
            detail: "cadence must be at least 1".into(),
        });
    }
    if !(horizon >= T::zero()) {
        return Err(CoreError::InvalidArgument {
            what: "horizon",
            detail: "horizon must be nonnegative".into(),
        });
    }
    if !(dt > T::zero()) {
        return Err(CoreError::InvalidArgument {
            what: "step size",
            detail: "dt must be positive".into(),
        });
    }
    s0.validate()?;
    let nsteps = (horizon / dt).as_f64().round() as usize;
    let mut snapshots = Vec::with_capacity(nsteps / cadence + 2);
    hook(s0)?;
    snapshots.push(s0.clone());
    let mut cur = s0.clone();
    for j in 1..=nsteps {
        cur = strang_step(&cur, pot, dt)?;
        if j % cadence == 0 || j == nsteps {
            cur.validate()?;
            hook(&cur)?;
            snapshots.push(cur.clone());
        }
    }
    Ok(Trajectory { snapshots, dt, cadence, scheme: "strang-midpoint" })
}

/// phi <- exp(-i tau (V * |phi|^2)) phi, the exact gauge flow over tau at
/// frozen density (a pointwise phase leaves |phi| unchanged).
fn gauge_phase<T: Scalar>(phi: &mut Field<T>, pot: &Potential<T>, tau: T) {
    let g = phi.grid().clone();
    let sq = Field::from_data(
        &g,
        phi.data().iter().map(|z| Complex::new(z.norm_sqr(), T::zero())).collect(),
    )
    .expect("|phi|^2 has the field's own length");
    let b = pot.convolve(&sq);
    for (z, q) in phi.data_mut().iter_mut().zip(b.data()) {
        *z *= cis(-tau * q.re);
    }
}

/// Condensate reduction of the flow: a pure condensate stays rank one, with
/// phi obeying i d/dt phi = -Lap phi + (V * |phi|^2) phi. One step is the
/// palindromic composition G(dt/2) F(dt) G(dt/2), F the exact free flow and
/// G the exact gauge phase, so mass is conserved to roundoff and the step
/// error is second order. Returns (time, field) at snapshot cadence, the
/// initial field first. Accepts the same steps as `strang_step`.
pub fn condensate_evolve<T: Scalar>(
    phi0: &Field<T>,
    pot: Option<&Potential<T>>,
    horizon: T,
    dt: T,
    cadence: usize,
) -> Result<Vec<(T, Field<T>)>> {
    if cadence == 0 {
        return Err(CoreError::InvalidArgument {
            what: "snapshot cadence",
            detail: "cadence must be at least 1".into(),
        });
    }
    if !(horizon >= T::zero()) {
        return Err(CoreError::InvalidArgument {
            what: "horizon",
            detail: "horizon must be nonnegative".into(),
        });
    }
    if !(dt > T::zero()) {
        return Err(CoreError::InvalidArgument {
            what: "step size",
            detail: "dt must be positive".into(),
        });
    }
    if let Some(p) = pot {
        if phi0.grid() != p.grid() {
            return Err(CoreError::ShapeMismatch { what: "field and potential grids" });
        }
    }
    let g = phi0.grid();
    let wmax = g.freq_max() * g.freq_max() * T::of(g.dim() as f64);
    let value = dt * T::of(2.0) * wmax;
    if value > T::of(tol::STABILITY_LIMIT) {
        return Err(CoreError::StabilityGuard {
            value: value.as_f64(),
            limit: tol::STABILITY_LIMIT,
        });
    }
    let nsteps = (horizon / dt).as_f64().round() as usize;
    let mut out = Vec::with_capacity(nsteps / cadence + 2);
    out.push((T::zero(), phi0.clone()));
    let mut cur = phi0.clone();
    let half = dt / T::of(2.0);
    for j in 1..=nsteps {
        if let Some(p) = pot {
            gauge_phase(&mut cur, p, half);
        }
        cur.free_propagate(dt);
        if let Some(p) = pot {
            gauge_phase(&mut cur, p, half);
        }
        if j % cadence == 0 || j == nsteps {
            out.push((dt * T::of(j as f64), cur.clone()));
        }
    }
    Ok(out)
}
