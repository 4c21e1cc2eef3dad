//! Central tolerance and guard constants.
//!
//! Every numerical contract the crate enforces is pinned here, in one place,
//! at `f64` width. Generic code converts with `Scalar::of` at the use site.
//! Nothing in this module is tuned per-test; tightening a value here must not
//! be answered by loosening it somewhere else.

/// Declared kernel symmetry (symmetric / hermitian) after any mutation.
pub const SYMMETRY: f64 = 1e-10;

/// Imaginary part of a hermitian kernel's diagonal, relative to trace scale.
pub const HERMITIAN_DIAG: f64 = 1e-10;

/// PSD slack: min eigenvalue of a density kernel must exceed
/// `-PSD_SCALE * max(1, trace)`.
pub const PSD_SCALE: f64 = 1e-8;

/// Brute-force quadrature oracle for kernel composition (small grids).
pub const COMPOSE_ORACLE: f64 = 1e-12;

/// Trace vs. eigenvalue-sum oracle.
pub const TRACE_ORACLE: f64 = 1e-10;

/// SVD reconstruction, relative to the kernel's L2 norm.
pub const SVD_RECONSTRUCT: f64 = 1e-10;

/// One-particle free propagator unitarity (relative L2 drift).
pub const UNITARY_FIELD: f64 = 1e-12;

/// Pair propagator unitarity (relative L2 drift).
pub const UNITARY_PAIR: f64 = 1e-10;

/// Propagator group law e(t+s) = e(t)e(s), relative.
pub const GROUP_LAW: f64 = 1e-10;

/// Free Gaussian image-sum oracle (>= 5 periodic images).
pub const GAUSSIAN_ORACLE: f64 = 1e-8;

/// Mass fraction within L/4 of the box boundary that aborts dispersive runs.
pub const WRAP_FRACTION: f64 = 1e-3;

/// Right-side quadrature oracles at small n.
pub const RHS_ORACLE: f64 = 1e-10;

/// Collision-form vs. conjugated-equation assembly of the same right side.
pub const BV_EQUIVALENCE: f64 = 1e-10;

/// Scaled-potential discrete L1 mass, relative to the unscaled mass.
pub const POTENTIAL_MASS: f64 = 0.02;

/// Spectral vs. direct-sum convolution oracle.
pub const CONVOLVE_ORACLE: f64 = 1e-10;

/// Inhomogeneous-solve PDE residual, relative to the forcing norm.
pub const DUHAMEL_RESIDUAL: f64 = 1e-4;

/// First and second resolvent identities at reference cadence, relative.
pub const RESOLVENT_IDENTITY: f64 = 1e-3;

/// Agreement of the two right-hand forms of the first identity.
pub const RESOLVENT_FORMS: f64 = 2e-3;

/// Pointwise Cauchy-Schwarz defects d0, d1 on trajectory snapshots.
pub const CS_DEFECT: f64 = 1e-9;

/// Kinetic density may dip this far below zero (spectral roundoff).
pub const KINETIC_FLOOR: f64 = -1e-9;

/// Stress tensor symmetry and pointwise PSD slack.
pub const STRESS_SYMMETRY: f64 = 1e-10;
pub const STRESS_PSD: f64 = 1e-9;

/// Admissibility line 2/p + d/q = d/2.
pub const ADMISSIBLE_LINE: f64 = 1e-12;

/// Direct-summation oracles for mixed space norms.
pub const NORM_ORACLE: f64 = 1e-12;

/// Rank-one factorization identities of mixed norms.
pub const RANK_ONE_FACTOR: f64 = 1e-12;

/// Plain-x vs plain-y mixed norms on symmetric kernels.
pub const MIRROR_FRAMES: f64 = 1e-10;

/// Multiplier vs derivative-assembly mixed Sobolev oracle.
pub const SOBOLEV_ORACLE: f64 = 1e-10;

/// Frame consistency of (2,2)-type norms across plain/sheared frames.
pub const FRAME_CONSISTENCY: f64 = 1e-12;

/// Log-convexity of mixed Sobolev norms under interpolation.
pub const SOBOLEV_INTERPOLATION: f64 = 1e-8;

/// Orthonormality Gram defect for rotated-frame factor families.
pub const FACTOR_ORTHONORMAL: f64 = 1e-10;

/// Weyl conjugation kernel defect at reference resolution (d=1, n=256).
pub const WEYL_DEFECT: f64 = 5e-3;

/// Morawetz rate identity |dM/dt - sum of terms|, relative.
pub const MORAWETZ_IDENTITY: f64 = 1e-3;

/// Slack for the signed Morawetz positivity checks, times a run scale.
pub const POSITIVITY_SLACK: f64 = 1e-6;

/// Delta-normalization constant check: pairing -> 8 pi * int rho^2.
pub const EIGHT_PI_REL: f64 = 0.05;

/// Conserved-quantity drift per unit time during evolution.
pub const NUMBER_DRIFT_RATE: f64 = 1e-8;
pub const ENERGY_DRIFT_RATE: f64 = 1e-6;

/// Acceptance run budgets (criterion 1).
pub const ACCEPT_NUMBER: f64 = 1e-7;
pub const ACCEPT_ENERGY: f64 = 1e-5;

/// Self-convergence order window for the split-step integrator.
pub const ORDER_TARGET: f64 = 2.0;
pub const ORDER_WINDOW: f64 = 0.2;

/// Stability guard: dt * max pair symbol magnitude <= pi.
pub const STABILITY_LIMIT: f64 = std::f64::consts::PI;

/// State-assembly consistency of (phi, k) -> (Lambda, Gamma).
pub const STATE_CONSISTENCY: f64 = 1e-8;

/// Dispersive-ratio acceptance: slope window and flatness cap.
pub const SLOPE_WINDOW: f64 = 0.1;
pub const RATIO_FLATNESS: f64 = 1.5;
