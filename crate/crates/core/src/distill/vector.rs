use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::hand::GraspPose;

/// Translation, first two rotation columns, joints.
pub const WRIST_LEN: usize = 9;

/// Flat grasp vector: `[T (3), R col 0 (3), R col 1 (3), θ]`.
pub fn grasp_to_vector(grasp: &GraspPose) -> Vec<f64> {
    let r = grasp.rotation.to_rotation_matrix();
    let m = r.matrix();
    let mut v = Vec::with_capacity(WRIST_LEN + grasp.joints.len());
    v.extend_from_slice(grasp.translation.as_slice());
    v.extend(m.column(0).iter());
    v.extend(m.column(1).iter());
    v.extend_from_slice(&grasp.joints);
    v
}

/// Inverse of [`grasp_to_vector`]; the two columns are re-orthonormalized
/// (Gram-Schmidt, third column by cross product).
pub fn vector_to_grasp(v: &[f64]) -> Result<GraspPose> {
    if v.len() < WRIST_LEN {
        return Err(Error::invalid(format!(
            "grasp vector needs at least {WRIST_LEN} entries, got {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("grasp vector has non-finite entries"));
    }
    let a = Vector3::new(v[3], v[4], v[5]);
    let b = Vector3::new(v[6], v[7], v[8]);
    let scale = a.norm().max(b.norm());
    if a.norm() < 1e-9 || a.cross(&b).norm() < 1e-6 * scale * scale {
        return Err(Error::degenerate(
            "rotation columns are zero or nearly parallel",
        ));
    }
    let c0 = a.normalize();
    let c1 = (b - c0 * c0.dot(&b)).normalize();
    let c2 = c0.cross(&c1);
    let rotation = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[c0, c1, c2]));
    Ok(GraspPose::new(
        Vector3::new(v[0], v[1], v[2]),
        UnitQuaternion::from_rotation_matrix(&rotation),
        v[WRIST_LEN..].to_vec(),
    ))
}
