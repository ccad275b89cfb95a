//! Region-conditioned dexterous grasp synthesis.
//!
//! The crate turns per-view part masks into voted face regions on a mesh,
//! optimizes 16-DoF hand grasps against a force-closure energy seeded on the
//! region's inflated convex hull, scores them with a quasi-static
//! friction-cone evaluator, and distills the surviving grasps into a small
//! diffusion sampler conditioned on basis-point encodings.

pub mod distill;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod hand;
pub mod optimize;
pub mod par;
pub mod pipeline;
pub mod record;
pub mod region;
pub mod rng;

pub use error::{Error, Result};
