//! Geometry and analysis toolkit for depth-based shape completion pipelines
//! and multi-finger grasp planning.
//!
//! The crate covers the non-learned machinery end to end: watertight mesh
//! preprocessing and occupancy labeling for training-data generation, a
//! structured-light depth sensor simulator, implicit-field evaluation with
//! Marching Cubes extraction and TSDF fusion, volumetric/surface evaluation
//! metrics, table-top scan segmentation, an analytic grasp-quality stack with
//! pose-uncertainty robustness scoring, and the multi-head winner-take-all
//! loss used to resolve grasp ambiguity.

pub mod error;
pub mod field;
pub mod geom;
pub mod grasp;
pub mod kdtree;
pub mod metrics;
pub mod hull;
pub mod io_util;
pub mod mesh;
pub mod multihead;
pub mod occupancy;
pub mod pipeline;
pub mod rng;
pub mod scene;
pub mod sensor;
pub mod shapes;

pub use error::{CoreError, Result};
pub use geom::{Aabb, Pt3, RigidScaleTransform, Vec3};
pub use mesh::bvh::TriangleBvh;
pub use mesh::TriangleMesh;
