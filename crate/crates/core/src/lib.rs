//! Quantum information bottleneck solvers and analytic benchmarks.

// Parameter guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod cq;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod qdib;
pub mod qib;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
