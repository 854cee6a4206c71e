//! Simulator and algorithm library for task-driven tactile exploration:
//! probabilistic shape estimation of star-shaped objects from simulated
//! cross-section scans, UCB-guided selection of what to scan next, and a
//! hole-insertion benchmark harness.

pub mod geometry;
pub mod scanner;
pub mod slam;

pub use geometry::{
    generate_object, make_hole, star_shape_check, true_min_margin, GeometryError, HoleContour,
    Orientation, Primitive, PrimitiveKind, SectionSpec, SolidObject,
};
pub use scanner::{NoiseConfig, ScanError, ScanPatch, SurfacePoint};
pub use slam::{PoseGraph, RigidTransform, SlamError};
