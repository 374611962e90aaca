//! Multiresolution solver on a graded tree of cell averages: thresholded
//! wavelet details drive refinement and coarsening, leaves evolve with the
//! finite-volume scheme either with one global time step (MR) or with
//! level-dependent steps (MRLT).

mod evolve;
mod plan;
pub mod predict;
pub mod tree;

pub use evolve::{macro_depth, mr_evolve_global, mrlt_evolve, run_mr, run_mr_observed, EvolveStats, MrOptions};
pub use predict::{child_stencil, project, Idx, Stencil};
pub use tree::{DetailNorm, MrTree, Node};
