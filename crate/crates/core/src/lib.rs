//! Spline projections onto refining knot sequences, viewed as martingales.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// quadrature and banded kernels read better with explicit indices
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod basis;
pub mod convergence;
pub mod error;
pub mod functions;
pub mod gram;
pub mod knots;
pub mod projection;
pub mod quadrature;

pub use basis::{Spline, SplineSpace};
pub use error::{Error, Result};
pub use knots::{Grid, KnotFamily, KnotProgram, Side};
