//! Steady-state superradiant lasing of incoherently pumped, inhomogeneously
//! broadened atomic ensembles in a lossy cavity, based on the second-order
//! cumulant moment equations.
//!
//! All rates and frequencies are in units of the cavity decay rate κ.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod moments;
pub mod solver;
pub mod spectrum;

pub use error::{Error, Result};
