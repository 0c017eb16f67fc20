//! Finite-support harmonic analysis on the integers for the nonlinear Roth
//! pattern `x, x + y, x + q*y^2`.
//!
//! The crate evaluates every functional that appears in the quantitative
//! density-increment argument for this pattern: Gowers uniformity and box
//! norms, the counting operator and its dual function, van der Corput
//! weights, the arithmetic box-norm inverse construction, degree-lowering
//! phase data, and the density-increment search loop. Each inequality is
//! exposed as a checkable report so that it can be property tested against
//! brute-force oracles.

pub mod concat;
pub mod counting;
pub mod degree;
mod error;
pub mod fourier;
pub mod gowers;
pub mod increment;
pub mod io;
pub mod params;
pub mod rng;
pub mod signal;
mod sum;
pub mod verify;
pub mod weights;

use serde::Serialize;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use params::{Params, ProgressionInstance};
pub use signal::Signal;

/// Relative slack used by every `holds` flag.
pub const INEQUALITY_SLACK: f64 = 1e-9;

/// Outcome of checking `lhs <= rhs` numerically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityReport {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let holds = lhs <= rhs * (1.0 + INEQUALITY_SLACK) + f64::MIN_POSITIVE;
        InequalityReport { lhs, rhs, holds }
    }
}
