//! Numerical fractional calculus of variations.
//!
//! Functionals of the form `J(y) = ∫_a^b L(x, I^{1-α} y, D^β y) dx`, where
//! `I` is the left Riemann-Liouville integral and `D` the left
//! Riemann-Liouville derivative, are discretized on a uniform grid. The crate
//! provides:
//!
//! * [`fracops`]: the discrete operators and their adjoints,
//! * [`expr`]: a small expression language with symbolic differentiation,
//! * [`varproblem`]: functional values and Euler-Lagrange residuals,
//! * [`solver`]: direct minimization, with an isoperimetric outer loop,
//! * [`certify`]: convexity and exact-field sufficiency checks.

pub mod certify;
pub mod expr;
pub mod fracops;
pub mod solver;
pub mod varproblem;

pub use certify::{ConvexityReport, ExactField, FieldCheckReport, FieldMinimizerReport};
pub use expr::{Expr, VarBinding};
pub use fracops::{FracOperator, FracOrder, Grid, OperatorKind, SampledFn};
pub use solver::{SolveConfig, SolveReport, SolveStatus};
pub use varproblem::{Constraint, Pins, Residual, VarProblem};
