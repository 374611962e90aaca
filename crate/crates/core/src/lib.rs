//! Adaptive finite-volume solvers for the compressible Euler equations:
//! a uniform-mesh reference solver, multiresolution on graded trees (with
//! and without local time stepping) and block-structured AMR, plus the
//! metrics used to compare them.

pub mod amr;
pub mod cases;
pub mod error;
pub mod euler;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod mr;
pub mod scheme;
pub mod unigrid;

pub use error::{Result, SolverError};
