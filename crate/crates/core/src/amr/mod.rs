//! Block-structured adaptive mesh refinement: hierarchies of disjoint
//! rectangular patches, gradient flagging with signature clustering,
//! recursive level integration with optional time refinement, averaging
//! and flux correction.

mod advance;
pub mod boxes;
mod hierarchy;
mod remesh;
mod snapshot;

pub use advance::{amr_base_level, run_amr, run_amr_observed};
pub use boxes::{cluster, IBox, Mask};
pub use hierarchy::{AmrLevel, AmrParams, Patch, PatchHierarchy};
pub use remesh::flag_cells;
pub use snapshot::{decode_hierarchy, encode_hierarchy, encode_snapshot, HierarchySnapshot, HIERARCHY_MAGIC};
