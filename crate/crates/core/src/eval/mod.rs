//! Quasi-static grasp evaluation: close the fingers, collect sphere contacts
//! and ask whether friction-limited contact forces can hold the object
//! against gravity (lift) and against extra accelerations (shake).

mod wrench;

use nalgebra::{Point3, Vector3, Vector6};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use wrench::{contact_wrenches, supply_feasible};

use crate::error::{Error, Result};
use crate::hand::{forward_kinematics, GraspPose, HandModel, JointRole};
use crate::optimize::{obstacle_penetration, SceneContext};
use crate::record::GraspRecord;
use crate::rng;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactState {
    pub point: Point3<f64>,
    /// Outward object normal.
    pub normal: Vector3<f64>,
    /// Penetration depth, zero when the sphere only hovers within tolerance.
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Lift,
    Shake,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Lift => "lift",
            Task::Shake => "shake",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    NoContact,
    Penetration,
    InfeasibleWrench,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub mu: f64,
    pub pyramid_sides: usize,
    /// Newtons, per contact.
    pub f_max: f64,
    pub residual_eps: f64,
    pub object_mass: f64,
    pub shake_accels: Vec<[f64; 3]>,
    pub d: usize,
    pub perturb_sigma: f64,
    pub contact_tol: f64,
    pub max_penetration: f64,
    pub close_increment: f64,
    pub task: Task,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let g = GRAVITY;
        EvalConfig {
            mu: 0.5,
            pyramid_sides: 8,
            f_max: 10.0,
            residual_eps: 1e-3,
            object_mass: 0.1,
            shake_accels: vec![
                [g, 0.0, 0.0],
                [-g, 0.0, 0.0],
                [0.0, g, 0.0],
                [0.0, -g, 0.0],
                [0.0, 0.0, g],
                [0.0, 0.0, -g],
            ],
            d: 5,
            perturb_sigma: 0.05,
            contact_tol: 0.002,
            max_penetration: 0.005,
            close_increment: 0.01,
            task: Task::Lift,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::invalid(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if self.pyramid_sides < 3 {
            return Err(Error::invalid("pyramid needs at least 3 sides"));
        }
        let checks = [
            ("f_max", self.f_max),
            ("residual_eps", self.residual_eps),
            ("object_mass", self.object_mass),
            ("contact_tol", self.contact_tol),
            ("max_penetration", self.max_penetration),
            ("close_increment", self.close_increment),
        ];
        for (name, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.perturb_sigma >= 0.0) {
            return Err(Error::invalid("perturb_sigma must be nonnegative"));
        }
        Ok(())
    }

    fn gravity_wrench(&self, accel: [f64; 3]) -> Vector6<f64> {
        let m = self.object_mass;
        Vector6::new(
            m * accel[0],
            m * accel[1],
            m * (accel[2] - GRAVITY),
            0.0,
            0.0,
            0.0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskOutcome {
    pub success: bool,
    pub contacts_used: usize,
    pub failure_reason: Option<FailureReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub lift: bool,
    pub shake: bool,
    pub smooth_label: f64,
    pub contacts_used: usize,
    pub failure_reason: Option<FailureReason>,
}

/// Curls each flexion joint toward its upper limit in `close_increment`
/// steps, in joint order. A joint stops one increment before any sphere it
/// moves would sink deeper than `contact_tol` into the target.
pub fn close_fingers(
    scene: &SceneContext,
    hand: &HandModel,
    grasp: &GraspPose,
    config: &EvalConfig,
) -> GraspPose {
    let mut g = grasp.clone();
    let spheres = hand.spheres();
    for j in 0..hand.dof() {
        let joint = hand.joint(j);
        if joint.role != JointRole::Flexion {
            continue;
        }
        let moved: Vec<usize> = (0..spheres.len())
            .filter(|&s| hand.joint_moves_link(j, spheres[s].link))
            .collect();
        while g.joints[j] < joint.upper {
            let previous = g.joints[j];
            g.joints[j] = (previous + config.close_increment).min(joint.upper);
            let state = forward_kinematics(hand, &g);
            let blocked = moved.iter().any(|&s| {
                let sd = scene
                    .target
                    .signed_distance(&state.sphere_centers[s])
                    .signed_distance;
                spheres[s].radius - sd > config.contact_tol
            });
            if blocked {
                g.joints[j] = previous;
                break;
            }
        }
    }
    g
}

/// One contact per collision sphere closer than `radius + contact_tol` to
/// the target surface.
pub fn detect_contacts(
    scene: &SceneContext,
    hand: &HandModel,
    grasp: &GraspPose,
    config: &EvalConfig,
) -> Vec<ContactState> {
    let state = forward_kinematics(hand, grasp);
    hand.spheres()
        .iter()
        .zip(&state.sphere_centers)
        .filter_map(|(s, c)| {
            let q = scene.target.signed_distance(c);
            if q.signed_distance >= s.radius + config.contact_tol {
                return None;
            }
            let offset = c - q.closest_point;
            let len = offset.norm();
            let normal = if len > 1e-12 {
                if q.signed_distance >= 0.0 {
                    offset / len
                } else {
                    -offset / len
                }
            } else {
                q.normal
            };
            Some(ContactState {
                point: q.closest_point,
                normal,
                depth: (s.radius - q.signed_distance).max(0.0),
            })
        })
        .collect()
}

/// Can the contacts cancel `external` (force; torque about `origin`)?
pub fn wrench_feasible(
    contacts: &[ContactState],
    external: &Vector6<f64>,
    origin: &Point3<f64>,
    config: &EvalConfig,
) -> bool {
    let columns = contact_wrenches(contacts, origin, config.mu, config.pyramid_sides);
    supply_feasible(&columns, &(-external), config.f_max, config.residual_eps)
}

fn evaluate_tasks(
    scene: &SceneContext,
    hand: &HandModel,
    grasp: &GraspPose,
    config: &EvalConfig,
) -> (TaskOutcome, bool) {
    let closed = close_fingers(scene, hand, grasp, config);
    let contacts = detect_contacts(scene, hand, &closed, config);
    let fail = |reason| {
        (
            TaskOutcome {
                success: false,
                contacts_used: contacts.len(),
                failure_reason: Some(reason),
            },
            false,
        )
    };
    if contacts.is_empty() {
        return fail(FailureReason::NoContact);
    }
    if contacts.iter().any(|c| c.depth >= config.max_penetration) {
        return fail(FailureReason::Penetration);
    }
    let state = forward_kinematics(hand, &closed);
    let collides = hand
        .spheres()
        .iter()
        .zip(&state.sphere_centers)
        .any(|(s, c)| obstacle_penetration(scene, c, s.radius) > 0.0);
    if collides {
        return fail(FailureReason::Collision);
    }
    let origin = scene.object_centroid;
    if !wrench_feasible(&contacts, &config.gravity_wrench([0.0; 3]), &origin, config) {
        return fail(FailureReason::InfeasibleWrench);
    }
    let lift = TaskOutcome {
        success: true,
        contacts_used: contacts.len(),
        failure_reason: None,
    };
    let shake = config
        .shake_accels
        .iter()
        .all(|&a| wrench_feasible(&contacts, &config.gravity_wrench(a), &origin, config));
    (lift, shake)
}

pub fn evaluate_lift(
    scene: &SceneContext,
    hand: &HandModel,
    grasp: &GraspPose,
    config: &EvalConfig,
) -> TaskOutcome {
    evaluate_tasks(scene, hand, grasp, config).0
}

pub fn evaluate_shake(
    scene: &SceneContext,
    hand: &HandModel,
    grasp: &GraspPose,
    config: &EvalConfig,
) -> TaskOutcome {
    let (lift, shake) = evaluate_tasks(scene, hand, grasp, config);
    if !lift.success {
        return lift;
    }
    TaskOutcome {
        success: shake,
        contacts_used: lift.contacts_used,
        failure_reason: (!shake).then_some(FailureReason::InfeasibleWrench),
    }
}

/// Trial `k` of a smooth label: trial 0 is the grasp itself, trial `k ≥ 1`
/// adds N(0, perturb_sigma²) to every joint (clamped) from
/// `rng::stream(config.seed, &[k])`.
pub fn perturbed_trial(
    hand: &HandModel,
    grasp: &GraspPose,
    config: &EvalConfig,
    k: usize,
) -> GraspPose {
    let mut g = grasp.clone();
    if k > 0 {
        let mut r = rng::stream(config.seed, &[k as u64]);
        for q in g.joints.iter_mut() {
            *q += config.perturb_sigma * r.sample::<f64, _>(StandardNormal);
        }
        hand.clamp_joints(&mut g.joints);
    }
    g
}

/// Mean success of the grasp and its `d` perturbed variants.
pub fn smooth_label(
    scene: &SceneContext,
    hand: &HandModel,
    grasp: &GraspPose,
    config: &EvalConfig,
    task: Task,
) -> f64 {
    let wins = (0..=config.d)
        .filter(|&k| {
            let g = perturbed_trial(hand, grasp, config, k);
            let (lift, shake) = evaluate_tasks(scene, hand, &g, config);
            match task {
                Task::Lift => lift.success,
                Task::Shake => lift.success && shake,
            }
        })
        .count();
    wins as f64 / (config.d + 1) as f64
}

/// Lift and shake of the grasp itself plus the smooth label for
/// `config.task`.
pub fn evaluate(
    scene: &SceneContext,
    hand: &HandModel,
    grasp: &GraspPose,
    config: &EvalConfig,
) -> EvalResult {
    let mut wins = 0;
    let mut first = None;
    for k in 0..=config.d {
        let g = perturbed_trial(hand, grasp, config, k);
        let (lift, shake) = evaluate_tasks(scene, hand, &g, config);
        let shake = lift.success && shake;
        let ok = match config.task {
            Task::Lift => lift.success,
            Task::Shake => shake,
        };
        wins += ok as usize;
        if k == 0 {
            first = Some((lift, shake));
        }
    }
    let (lift, shake) = first.expect("trial 0 always runs");
    EvalResult {
        lift: lift.success,
        shake,
        smooth_label: wins as f64 / (config.d + 1) as f64,
        contacts_used: lift.contacts_used,
        failure_reason: lift
            .failure_reason
            .or((!shake).then_some(FailureReason::InfeasibleWrench)),
    }
}

/// Records whose smooth label is at least `threshold`; unlabeled records
/// are dropped.
pub fn filter_dataset(records: &[GraspRecord], threshold: f64) -> Result<Vec<GraspRecord>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!(
            "threshold must be in [0, 1], got {threshold}"
        )));
    }
    Ok(records
        .iter()
        .filter(|r| r.smooth_label.is_some_and(|l| l >= threshold))
        .cloned()
        .collect())
}
