//! Discrete left and right Riemann-Liouville fractional integrals and
//! derivatives of order in (0, 1) on uniform grids.
//!
//! Left operators are lower-triangular: the value at `x_i` only reads samples
//! at `x_0..=x_i`. Right operators are the upper-triangular mirror images.
//! Two constructions of right operators exist:
//!
//! * [`build_right_rlfi`] / [`build_right_rlfd`] reflect the left scheme.
//! * [`build_right_adjoint`] takes the transpose of a left operator in the
//!   trapezoid inner product. Discrete integration by parts is then exact, so
//!   the gradient of a discretized functional coincides with its discrete
//!   Euler-Lagrange residual. Residual code uses this form.
//!
//! Sampled functions are assumed bounded; the integrability hypotheses of the
//! continuous integration-by-parts rules cannot be checked on samples.
//!
//! Derivative rows near `x = a` (and, for right operators, near `x = b`) are
//! computed but inaccurate; accuracy statements refer to [`Grid::interior`].

mod gamma;
mod grid;
mod operator;

pub use gamma::gamma;
pub use grid::{Grid, SampledFn};
pub use operator::{
    build_left_rlfd, build_left_rlfi, build_right_adjoint, build_right_rlfd, build_right_rlfi,
    FracOperator, FracOrder, OperatorKind, Realization,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FracError {
    #[error("gamma is only defined here for finite z > 0, got {0}")]
    GammaDomain(f64),
    #[error("fractional order must lie in the open interval (0, 1), got {0}")]
    OrderOutOfRange(f64),
    #[error("invalid interval [{a}, {b}]: need finite a < b")]
    InvalidInterval { a: f64, b: f64 },
    #[error("grid needs at least one cell")]
    EmptyGrid,
    #[error("expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("sampled function lives on a different grid")]
    GridMismatch,
    #[error("adjoint construction needs a directly built left operator, got {0}")]
    NotLeftOperator(OperatorKind),
}
