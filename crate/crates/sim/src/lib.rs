//! Monte-Carlo harness for hybrid block diagonalization: scenario files,
//! parallel sweeps, CSV output, channel dumps and the invariant suite.

pub mod config;
pub mod dump;
mod error;
pub mod output;
pub mod sweep;
pub mod validate;

pub use error::{Result, SimError};
