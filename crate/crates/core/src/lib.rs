//! Construction and verification toolkit for strongly nonlocal sets of
//! orthogonal multipartite states built from cyclic-shift orbits.
//!
//! Conventions used throughout the crate:
//!
//! - Parties are indexed from 0 internally and printed 1-based.
//! - Sub-indices over a set of parties are ordered lexicographically with
//!   the lowest-numbered party as the most significant digit.
//! - States are not normalized.

pub mod cli;
pub mod entanglement;
mod error;
pub mod nonlocality;
pub mod orbits;
pub mod states;
pub mod tensor;

pub use error::{Error, Result};
pub use orbits::MultiIndex;
pub use tensor::{Bipartition, StateVector};

/// Default relative tolerance for rank and null-space decisions.
pub const DEFAULT_TOL: f64 = 1e-9;
