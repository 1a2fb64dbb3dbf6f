//! Piecewise-constant density estimation on axis-aligned boxes, driven by
//! per-dimension uniformity tests and a symmetric-discrepancy test, plus the
//! sub-level tree machinery that turns an estimate into a mode hierarchy and
//! a spectral community detector for graphs.

pub mod datagen;
pub mod estimator;
pub mod geometry;
pub mod regiongraph;
pub mod sltree;
pub mod spectral;
pub mod uniformity;

mod unionfind;

pub use estimator::{estimate_density, EstimatorConfig, PiecewiseDensity};
pub use geometry::{PartitionTree, PointSet, Region};
pub use regiongraph::{build_region_graph, RegionGraph};
pub use sltree::{build_sublevel_tree, extract_branches, BranchSelect, SubLevelTree};
pub use spectral::{detect_communities, CommunityConfig, CommunityResult, Network};
