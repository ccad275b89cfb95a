use nalgebra::{Point3, UnitQuaternion, Vector3};

use super::{EnergyBreakdown, EnergyWeights, OptimizerConfig, SceneContext};
use crate::geometry::TriangleMesh;
use crate::hand::{
    forward_kinematics, joint_violation, self_penetration, GraspPose, HandModel, HandStateWorld,
    HAND_DOF,
};

/// Gradient length for the standard hand: translation, rotation, joints.
pub const GRAD_DIM: usize = 6 + HAND_DOF;

#[derive(Debug, Clone, Copy)]
struct ContactTerm {
    distance: f64,
    wrench: Option<[f64; 6]>,
}

fn contact_term(scene: &SceneContext, x: &Point3<f64>, tau: f64) -> ContactTerm {
    let c = scene.target.closest(x);
    let distance = c.distance2.sqrt();
    let wrench = (distance < tau).then(|| {
        let face_normal = scene.target.face_normal(c.face);
        // Direction to the closest point varies smoothly across face seams;
        // the face normal only picks which side is out.
        let n = if distance > 1e-12 {
            let u = (x - c.point) / distance;
            if u.dot(&face_normal) >= 0.0 {
                u
            } else {
                -u
            }
        } else {
            face_normal
        };
        let force = -n;
        let torque = (x - scene.object_centroid).cross(&force);
        [force.x, force.y, force.z, torque.x, torque.y, torque.z]
    });
    ContactTerm { distance, wrench }
}

fn mesh_penetration(mesh: &TriangleMesh, c: &Point3<f64>, r: f64) -> f64 {
    // Farther than r from the bounding box means farther than r from the solid.
    if mesh.bounds().distance2(c) >= r * r {
        return 0.0;
    }
    (r - mesh.signed_distance(c).signed_distance).max(0.0)
}

/// Depth of a ball of radius `r` at `c` into the target, every obstacle and
/// the table, summed.
pub fn sphere_penetration(scene: &SceneContext, c: &Point3<f64>, r: f64) -> f64 {
    mesh_penetration(&scene.target, c, r) + obstacle_penetration(scene, c, r)
}

/// Like [`sphere_penetration`] but ignoring the target.
pub fn obstacle_penetration(scene: &SceneContext, c: &Point3<f64>, r: f64) -> f64 {
    let mut pen = 0.0;
    for o in &scene.obstacles {
        pen += mesh_penetration(&o.mesh, c, r);
    }
    if let Some(h) = scene.table_height {
        pen += (r - (c.z - h)).max(0.0);
    }
    pen
}

/// Per-item terms of one evaluation, kept so that a joint perturbation only
/// recomputes what that joint moves.
#[derive(Clone)]
struct Terms {
    contacts: Vec<ContactTerm>,
    penetration: Vec<f64>,
}

pub(crate) struct EnergyModel<'a> {
    scene: &'a SceneContext,
    hand: &'a HandModel,
    weights: EnergyWeights,
    tau: f64,
    moved_contacts: Vec<Vec<usize>>,
    moved_spheres: Vec<Vec<usize>>,
}

impl<'a> EnergyModel<'a> {
    pub(crate) fn new(
        scene: &'a SceneContext,
        hand: &'a HandModel,
        weights: &EnergyWeights,
        tau: f64,
    ) -> Self {
        let moved_contacts = (0..hand.dof())
            .map(|j| {
                (0..hand.contacts().len())
                    .filter(|&i| hand.joint_moves_link(j, hand.contacts()[i].link))
                    .collect()
            })
            .collect();
        let moved_spheres = (0..hand.dof())
            .map(|j| {
                (0..hand.spheres().len())
                    .filter(|&i| hand.joint_moves_link(j, hand.spheres()[i].link))
                    .collect()
            })
            .collect();
        EnergyModel {
            scene,
            hand,
            weights: *weights,
            tau,
            moved_contacts,
            moved_spheres,
        }
    }

    fn terms(&self, state: &HandStateWorld) -> Terms {
        let spheres = self.hand.spheres();
        Terms {
            contacts: state
                .contact_points
                .iter()
                .map(|x| contact_term(self.scene, x, self.tau))
                .collect(),
            penetration: state
                .sphere_centers
                .iter()
                .zip(spheres)
                .map(|(c, s)| sphere_penetration(self.scene, c, s.radius))
                .collect(),
        }
    }

    fn assemble(
        &self,
        grasp: &GraspPose,
        state: &HandStateWorld,
        terms: &Terms,
    ) -> EnergyBreakdown {
        let mut wrench = [0.0; 6];
        let mut active = 0;
        let mut e_dis = 0.0;
        for t in &terms.contacts {
            e_dis += t.distance;
            if let Some(w) = t.wrench {
                active += 1;
                for k in 0..6 {
                    wrench[k] += w[k];
                }
            }
        }
        let e_fc = if active == 0 {
            1.0
        } else {
            wrench.iter().map(|w| w * w).sum::<f64>().sqrt() / active as f64
        };
        let e_joints =
            joint_violation(self.hand, &grasp.joints).expect("pose checked against hand");
        let e_pen: f64 = terms.penetration.iter().sum();
        let e_spen = self_penetration(self.hand, state);
        let w = &self.weights;
        EnergyBreakdown {
            e_fc,
            e_dis,
            e_joints,
            e_pen,
            e_spen,
            total: w.w_fc * e_fc
                + w.w_dis * e_dis
                + w.w_joints * e_joints
                + w.w_pen * e_pen
                + w.w_spen * e_spen,
            active_contacts: active,
        }
    }

    pub(crate) fn eval(&self, grasp: &GraspPose) -> EnergyBreakdown {
        let state = forward_kinematics(self.hand, grasp);
        self.assemble(grasp, &state, &self.terms(&state))
    }

    /// Energy after changing joint `j` only, reusing `base` for every item
    /// the joint does not move. Bit-identical to a full evaluation.
    fn eval_joint(&self, grasp: &GraspPose, j: usize, base: &Terms) -> f64 {
        let state = forward_kinematics(self.hand, grasp);
        let mut terms = base.clone();
        for &i in &self.moved_contacts[j] {
            terms.contacts[i] = contact_term(self.scene, &state.contact_points[i], self.tau);
        }
        let spheres = self.hand.spheres();
        for &i in &self.moved_spheres[j] {
            terms.penetration[i] =
                sphere_penetration(self.scene, &state.sphere_centers[i], spheres[i].radius);
        }
        self.assemble(grasp, &state, &terms).total
    }

    /// Central differences; joints are skipped (left at zero) when `frozen`.
    pub(crate) fn gradient(&self, grasp: &GraspPose, h: f64, frozen: bool) -> Vec<f64> {
        let dof = self.hand.dof();
        let mut g = vec![0.0; 6 + dof];
        for (k, gk) in g.iter_mut().enumerate().take(6) {
            let plus = self.eval(&wrist_perturbation(grasp, k, h)).total;
            let minus = self.eval(&wrist_perturbation(grasp, k, -h)).total;
            *gk = (plus - minus) / (2.0 * h);
        }
        if frozen {
            return g;
        }
        let state = forward_kinematics(self.hand, grasp);
        let base = self.terms(&state);
        for j in 0..dof {
            let mut p = grasp.clone();
            p.joints[j] += h;
            let plus = self.eval_joint(&p, j, &base);
            p.joints[j] = grasp.joints[j] - h;
            let minus = self.eval_joint(&p, j, &base);
            g[6 + j] = (plus - minus) / (2.0 * h);
        }
        g
    }
}

/// Moves wrist coordinate `k` by `h`: 0..3 world translation, 3..6 rotation
/// about the hand's own axes (`R ← R·exp(h·e)`).
pub fn wrist_perturbation(grasp: &GraspPose, k: usize, h: f64) -> GraspPose {
    let mut p = grasp.clone();
    if k < 3 {
        p.translation[k] += h;
    } else {
        let mut axis = Vector3::zeros();
        axis[k - 3] = h;
        p.rotation = grasp.rotation * UnitQuaternion::from_scaled_axis(axis);
    }
    p
}

pub fn energy(
    scene: &SceneContext,
    hand: &HandModel,
    grasp: &GraspPose,
    weights: &EnergyWeights,
    config: &OptimizerConfig,
) -> EnergyBreakdown {
    EnergyModel::new(scene, hand, weights, config.contact_threshold).eval(grasp)
}

/// Energy plus the world-frame hand state it was computed from.
pub fn energy_with_state(
    scene: &SceneContext,
    hand: &HandModel,
    grasp: &GraspPose,
    weights: &EnergyWeights,
    config: &OptimizerConfig,
) -> (EnergyBreakdown, HandStateWorld) {
    let model = EnergyModel::new(scene, hand, weights, config.contact_threshold);
    let state = forward_kinematics(hand, grasp);
    let e = model.assemble(grasp, &state, &model.terms(&state));
    (e, state)
}

/// Central-difference gradient over `[T, ω, θ]` with step `config.fd_epsilon`.
pub fn energy_gradient(
    scene: &SceneContext,
    hand: &HandModel,
    grasp: &GraspPose,
    weights: &EnergyWeights,
    config: &OptimizerConfig,
) -> Vec<f64> {
    EnergyModel::new(scene, hand, weights, config.contact_threshold).gradient(
        grasp,
        config.fd_epsilon,
        false,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;
    use crate::hand::bundled_hand;

    #[test]
    fn partial_joint_evaluation_matches_full() {
        let hand = bundled_hand();
        let scene = SceneContext::whole(shapes::cylinder(0.035, 0.15, 32, 4)).unwrap();
        let model = EnergyModel::new(&scene, &hand, &EnergyWeights::default(), 0.005);
        let mut g = GraspPose::identity(hand.dof());
        g.joints = hand.init_posture();
        g.translation = Vector3::new(0.0, -0.03, -0.06);
        let base = model.terms(&forward_kinematics(&hand, &g));
        for j in 0..hand.dof() {
            let mut p = g.clone();
            p.joints[j] += 0.3;
            assert_eq!(
                model.eval_joint(&p, j, &base),
                model.eval(&p).total,
                "joint {j}"
            );
        }
    }
}
