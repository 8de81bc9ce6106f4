//! Rigid transforms, meshes, point clouds, signed-distance queries, and
//! low-discrepancy sampling shared by the rest of the pipeline.

mod cloud;
pub mod halton;
mod mesh;
mod sdf;
pub mod shapes;
mod transform;

pub use cloud::PointCloud;
pub use halton::{halton, radical_inverse};
pub use mesh::TriangleMesh;
pub use sdf::{closest_point_on_triangle, DistanceQuery};
pub use transform::{
    rotation_angle_between, rotation_from_axis_angle, rotation_log, skew, Transform3,
};
