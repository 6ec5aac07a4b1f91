//! View-consistent mesh extraction from procedural signed distance fields.
//!
//! A multi-view level-of-detail octree is built over the scene
//! ([`octree`]), dual contoured into triangle meshes ([`contour`]) and
//! written out ([`mesh`]). [`evalkit`] renders the result from camera
//! paths and scores frame-to-frame consistency.

pub mod contour;
pub mod error;
pub mod evalkit;
pub mod fixtures;
pub mod mesh;
pub mod octree;
pub mod pipeline;
pub mod sdf;
pub mod view;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

pub use contour::{extract, ExtractOptions};
pub use mesh::{Mesh, MeshAudit};
pub use octree::{build, BuildConfig, LeafComplex, NodeKey};
pub use pipeline::{run, PipelineConfig};
pub use sdf::SdfExpr;
pub use view::{Camera, LodTargets};
