//! Error type shared by the numerical core.
//!
//! Guard failures name the offending quantity and the limit it broke, so a
//! harness run that dies does so with an actionable message rather than a
//! bare panic.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {detail}")]
    InvalidGrid { detail: String },

    #[error("invalid argument `{what}`: {detail}")]
    InvalidArgument { what: &'static str, detail: String },

    #[error("shape mismatch in {what}")]
    ShapeMismatch { what: &'static str },

    #[error("{tag} symmetry defect {defect:.3e} exceeds {tol:.3e}")]
    SymmetryDefect { tag: &'static str, defect: f64, tol: f64 },

    #[error("density kernel not PSD: min eigenvalue {min_eig:.6e} below -{tol:.3e}")]
    PsdDefect { min_eig: f64, tol: f64 },

    #[error(
        "potential under-resolved: scaled step {scaled_step:.4e} exceeds {limit:.4e}; \
         need n >= {minimal_n}"
    )]
    ResolutionGuard { scaled_step: f64, limit: f64, minimal_n: usize },

    #[error("scaled support radius {support:.4e} exceeds half box {half_box:.4e}")]
    SupportGuard { support: f64, half_box: f64 },

    #[error("radial profile increases at r = {at_r:.6} (v' <= 0 required)")]
    ProfileNotMonotone { at_r: f64 },

    #[error("radial profile negative at r = {at_r:.6}")]
    ProfileNegative { at_r: f64 },

    #[error("stability guard: dt * max|symbol| = {value:.4} exceeds {limit:.4}")]
    StabilityGuard { value: f64, limit: f64 },

    #[error("wrap-around mass fraction {fraction:.3e} exceeds {limit:.1e}")]
    WrapAround { fraction: f64, limit: f64 },

    #[error("kernel under-resolved in time: t = {t:.4e} below band limit t_min = {t_min:.4e}")]
    BandLimit { t: f64, t_min: f64 },

    #[error("substep budget exceeded: propagation needs {needed} substeps (budget {budget})")]
    SubstepBudget { needed: usize, budget: usize },

    #[error("quadrature cadence too coarse: residual {residual:.3e} exceeds {tol:.3e}")]
    CadenceTooCoarse { residual: f64, tol: f64 },

    #[error("partition threshold unreachable: a single step of dt = {dt:.3e} already exceeds eps = {eps:.3e}")]
    IntervalTooShort { eps: f64, dt: f64 },

    #[error("state not normalizable: pair mass {pair_mass:.6} >= 1")]
    NotNormalizable { pair_mass: f64 },

    #[error("conserved quantity `{what}` drifted at {rate:.3e} per unit time (limit {limit:.3e})")]
    DriftGuard { what: &'static str, rate: f64, limit: f64 },

    #[error("orthonormality Gram defect {defect:.3e} exceeds {tol:.3e}")]
    NotOrthonormal { defect: f64, tol: f64 },

    #[error("series did not converge: {what} after {terms} terms")]
    SeriesDiverged { what: &'static str, terms: usize },

    #[error("snapshot format error: {detail}")]
    Format { detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
