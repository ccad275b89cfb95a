//! Triangle meshes and the spatial queries every other stage relies on.

mod bvh;
mod fps;
mod hull;
mod mesh;
pub mod shapes;
pub mod triangle;

pub use bvh::{Aabb, Closest};
pub use fps::farthest_point_sampling;
pub use hull::{convex_hull, inflate_hull, vertex_normals};
pub use mesh::{
    closest_brute_force, load_mesh, parse_mesh, raycast_brute_force, RayHit, SurfaceQueryResult,
    TriangleMesh, MIN_FACE_AREA, RAY_T_MIN,
};

pub type Point = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
