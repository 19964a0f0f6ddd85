//! Greedy adversarial equilibria for smooth, uniformly bounded min-max
//! objectives `f(x, y)` accessed through value / `∇_y f` / `∇²_y f` oracles.
//!
//! The max-player is modeled by a second-order ascent routine
//! ([`greedy_path::run_greedy_path`]) whose piecewise-linear iterate path is a
//! verifiable greedy path; the min-player descends a truncated
//! Gaussian-smoothed surrogate of the resulting greedy-max value using a
//! zeroth-order stochastic gradient ([`smoothing`]). [`solver::solve`] runs
//! the full alternating scheme and [`certify`] re-checks every claimed
//! equilibrium property after the fact, statistically where necessary.
//!
//! All randomness is drawn from splittable counter-based streams, so every
//! run is reproducible bit-for-bit from its seed.

// `!(x > 0.0)` guards reject NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod error;
pub mod greedy_path;
pub mod hyper;
pub mod linalg;
pub mod oracle;
mod par;
pub mod smoothing;
pub mod solver;
pub mod trace;

pub use error::{GaeError, Result};
