//! Rank-one ladder factorization, dense block-encoding oracles, Chebyshev
//! exponentiation and a compile-once circuit IR for masked
//! similarity-transformed Hamiltonians.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line driver and anything touching the filesystem live in the `composer`
//! crate.
#![no_std]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod circuit;
pub mod diagnostics;
pub mod error;
pub mod factorization;
pub mod fermion;
pub mod integrals;
pub mod ladders;
pub mod linalg;
pub mod mask;
pub mod oracle;
pub mod qsp;
pub mod resources;

pub use error::{Error, Result};
pub use linalg::{CMat, RMat, C64};
