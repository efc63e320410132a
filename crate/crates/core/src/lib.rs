//! Hybrid block diagonalization for massive multiuser MIMO downlinks.
//!
//! The crate is `no_std` with `alloc`. It covers channel generation
//! ([`channel`]), the phase-only RF stage ([`rf`]), baseband block
//! diagonalization ([`bd`]), stream power loading ([`power`]), rate
//! evaluation ([`rate`]) and the deterministic per-trial kernel of the
//! Monte-Carlo harness ([`scenario`]).
#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bd;
pub mod channel;
mod error;
pub mod linalg;
pub mod power;
pub mod rate;
pub mod rf;
pub mod scenario;
pub mod seed;
pub mod system;

pub use error::{Error, Result};
