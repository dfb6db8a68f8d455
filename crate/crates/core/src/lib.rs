//! Numerical toolkit for the Liouville-map calculus on the hyperbolic plane.
//!
//! The crate computes Liouville measures of boxes of geodesics, constructs
//! earthquake and quake-bend boundary maps of finitely supported measured
//! laminations, evaluates pullback Liouville functionals against Hölder test
//! functions, and checks closed-form first and second derivatives of those
//! functionals against independent finite-difference and Cauchy-integral
//! oracles.
//!
//! Module layout:
//!
//! * [`hyp`] — boundary points in projective coordinates, Möbius maps,
//!   cross-ratios, angle kernels, complex distance between geodesics.
//! * [`lamination`] — finitely supported measured laminations, Thurston-norm
//!   estimation, disk truncation, orbit generators.
//! * [`earthquake`] — piecewise-Möbius boundary maps of earthquakes and
//!   quake-bends.
//! * [`currents`] — Liouville box masses, adaptive quadrature against the
//!   Liouville density, dyadic-subdivision functionals.
//! * [`deriv`] — derivative formulas along earthquake/quake-bend paths and
//!   their oracles.

pub mod currents;
pub mod deriv;
pub mod earthquake;
pub mod hyp;
pub mod lamination;

use num_complex::Complex64;

pub use currents::{GeodesicBox, QuadResult, TestFunction};
pub use earthquake::PiecewiseMobiusMap;
pub use hyp::{BoundaryPoint, Geodesic, MobiusMap, PointH, Side};
pub use lamination::FiniteLamination;

/// Crate-wide error type.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("geodesics share an endpoint")]
    SharedEndpoint,
    #[error("geodesics do not cross")]
    NotCrossing,
    #[error("matrix is singular or nearly singular")]
    SingularMatrix,
    #[error("invalid box of geodesics: {0}")]
    InvalidBox(String),
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
    #[error("invalid lamination: {issues:?}")]
    InvalidLamination {
        issues: Vec<lamination::LaminationIssue>,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("branch guard: cross-ratio {0} too close to the log branch cut")]
    BranchGuard(Complex64),
    #[error("quadrature tolerance not met: achieved {achieved:.3e}, requested {requested:.3e}")]
    ToleranceNotMet {
        value: Complex64,
        achieved: f64,
        requested: f64,
        evaluations: u64,
    },
    #[error("dyadic sums converge too slowly (best increment {best_increment:.3e} at level {level})")]
    SlowConvergence { level: u32, best_increment: f64 },
    #[error("finite-difference stencil evaluation failed: {0}")]
    StencilFailure(String),
    #[error("path evaluation failed during contour integration: {0}")]
    PathEvaluationFailure(String),
    #[error("all magnitudes underflowed to zero")]
    AllZero,
}

pub type Result<T> = std::result::Result<T, Error>;
