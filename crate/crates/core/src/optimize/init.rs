use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{OptimizerConfig, SceneContext};
use crate::error::{Error, Result};
use crate::geometry::{
    convex_hull, farthest_point_sampling, inflate_hull, vertex_normals, TriangleMesh,
};
use crate::hand::{GraspPose, HandModel};
use crate::rng;

/// Convex hull of the vertices of the region's faces.
pub fn segmented_hull(scene: &SceneContext) -> Result<TriangleMesh> {
    if scene.region.face_indices.is_empty() {
        return Err(Error::empty(format!(
            "region {:?} has no faces",
            scene.region.label
        )));
    }
    let vertex_ids: BTreeSet<usize> = scene
        .region
        .face_indices
        .iter()
        .flat_map(|&f| scene.target.faces()[f])
        .collect();
    let points: Vec<Point3<f64>> = vertex_ids
        .iter()
        .map(|&v| scene.target.vertices()[v])
        .collect();
    convex_hull(&points)
}

/// Wrist rotation whose palm normal (+z) points along `approach`, rolled by
/// `roll` about that axis.
pub fn palm_frame(approach: &Vector3<f64>, roll: f64) -> UnitQuaternion<f64> {
    let align = UnitQuaternion::rotation_between(&Vector3::z(), approach)
        .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI));
    align * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), roll)
}

fn gaussian3<R: Rng>(rng: &mut R, sigma: f64) -> Vector3<f64> {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Vector3::new(x, y, z) * sigma
}

/// Seeds `count` grasps: palms at farthest-point anchors on the inflated
/// segmented hull, facing inward, with uniform roll and Gaussian jitter.
/// Anchors repeat cyclically if the hull has fewer vertices than `count`.
/// Grasp `i` draws from `rng::stream(config.seed, &[i])`.
pub fn init_grasps(
    scene: &SceneContext,
    hand: &HandModel,
    count: usize,
    config: &OptimizerConfig,
) -> Result<Vec<GraspPose>> {
    if count == 0 {
        return Err(Error::invalid("init count must be at least 1"));
    }
    config.validate()?;
    let hull = segmented_hull(scene)?;
    let inflated = inflate_hull(&hull, config.inflate_delta_for(&scene.target))?;
    let normals = vertex_normals(&inflated);
    let verts = inflated.vertices();
    let anchors = farthest_point_sampling(verts, count.min(verts.len()), config.seed)?;
    Ok((0..count)
        .map(|i| {
            let a = anchors[i % anchors.len()];
            let mut r = rng::stream(config.seed, &[i as u64]);
            let roll = r.gen_range(0.0..2.0 * PI);
            let rotation = palm_frame(&-normals[a], roll)
                * UnitQuaternion::from_scaled_axis(gaussian3(&mut r, config.init_sigma_rot));
            let translation = verts[a].coords + gaussian3(&mut r, config.init_sigma_t);
            let mut joints: Vec<f64> = hand
                .init_posture()
                .iter()
                .map(|&q| q + config.init_sigma_theta * r.sample::<f64, _>(StandardNormal))
                .collect();
            hand.clamp_joints(&mut joints);
            GraspPose::new(translation, rotation, joints)
        })
        .collect())
}
