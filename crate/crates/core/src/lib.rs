//! Energy-optimal strokes of axisymmetric swimmers at zero Reynolds number.
//!
//! The pipeline, bottom up: cubic spline bases ([`bspline`]), the ring
//! Stokeslet and Galerkin boundary elements ([`bem`]), parametric swimmer
//! shapes ([`geometry`]), reduced drift and energy metric per shape
//! ([`reduced`]), time-discretized stroke functionals ([`stroke`]) and the
//! SQP minimizer ([`sqp`]) that ties them together.

pub mod bem;
pub mod bspline;
pub mod elliptic;
pub mod geometry;
pub mod optimize;
pub mod quadrature;
pub mod reduced;
pub mod sqp;
pub mod stroke;

pub use bem::{assemble, BemError, BoundaryOperator};
pub use bspline::{build_basis, eval_curve, BasisSet, SplineError};
pub use elliptic::{complete_e, complete_k, EllipticError};
pub use geometry::{
    equivalent_radius, Configuration, GeneratorCurve, GeometryError, PatchKind, ShapeFamily, StickDonut, ThreeSphere,
};
pub use reduced::{compute_reduced, ReducedCoefficients, ReducedError, ReducedModel};
pub use sqp::{kkt_residual, solve, solve_observed, IterationLog, NlpProblem, SqpError, SqpOptions, SqpOutcome, SqpReport, SqpStatus};
pub use stroke::{StrokeError, StrokeEvaluation, StrokeFunctional, StrokePath, TimeBasis};
pub use optimize::{initial_stroke, optimize_stroke, OptimizeError, StrokeMode, StrokeOptimum, StrokeProblem, StrokeSetup};
