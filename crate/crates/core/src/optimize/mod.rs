//! Grasp synthesis: seeding on the region's inflated hull and descent on the
//! force-closure energy.

mod descent;
mod energy;
mod init;

use std::fmt::Write as _;

use nalgebra::{Isometry3, Point3};
use serde::{Deserialize, Serialize};

pub use descent::{optimize, optimize_batch, OptimizeResult};
pub use energy::{
    energy, energy_gradient, energy_with_state, obstacle_penetration, sphere_penetration,
    wrist_perturbation, GRAD_DIM,
};
pub use init::{init_grasps, palm_frame, segmented_hull};

use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::region::UsefulRegion;

/// A fixed mesh in world coordinates that the hand must not penetrate.
#[derive(Debug, Clone)]
pub struct Obstacle {
    pub name: String,
    pub mesh: TriangleMesh,
}

impl Obstacle {
    /// Places `mesh` (given in its own frame) at `pose`.
    pub fn new(name: &str, mesh: &TriangleMesh, pose: &Isometry3<f64>) -> Result<Self> {
        Ok(Obstacle {
            name: name.to_string(),
            mesh: mesh.transformed(pose, 1.0)?,
        })
    }
}

/// Everything the energy needs about the world. Immutable once built.
#[derive(Debug, Clone)]
pub struct SceneContext {
    pub target: TriangleMesh,
    pub obstacles: Vec<Obstacle>,
    /// Height of a horizontal table plane; the half-space below it is solid.
    pub table_height: Option<f64>,
    pub region: UsefulRegion,
    pub object_centroid: Point3<f64>,
}

impl SceneContext {
    pub fn new(target: TriangleMesh, region: UsefulRegion) -> Result<Self> {
        if region.tally.counts.len() != target.face_count() {
            return Err(Error::invalid(format!(
                "region tally covers {} faces, target has {}",
                region.tally.counts.len(),
                target.face_count()
            )));
        }
        if let Some(&f) = region
            .face_indices
            .iter()
            .find(|&&f| f >= target.face_count())
        {
            return Err(Error::invalid(format!("region face {f} out of range")));
        }
        let object_centroid = target.centroid();
        Ok(SceneContext {
            target,
            obstacles: Vec::new(),
            table_height: None,
            region,
            object_centroid,
        })
    }

    /// Scene whose region is the whole target.
    pub fn whole(target: TriangleMesh) -> Result<Self> {
        let faces: Vec<usize> = (0..target.face_count()).collect();
        let region = UsefulRegion::from_faces("all", &target, &faces)?;
        SceneContext::new(target, region)
    }

    pub fn with_obstacle(mut self, obstacle: Obstacle) -> Self {
        self.obstacles.push(obstacle);
        self
    }

    pub fn with_table(mut self, height: Option<f64>) -> Self {
        self.table_height = height;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyWeights {
    /// Weight of the force-closure term. 1 unless a test isolates other terms.
    pub w_fc: f64,
    pub w_dis: f64,
    pub w_joints: f64,
    pub w_pen: f64,
    pub w_spen: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights {
            w_fc: 1.0,
            // e_dis sums over every candidate, so a light weight keeps it from
            // pulling the hand into the object; penetration is a linear hinge
            // and must dominate to reach sub-0.1 mm depths.
            w_dis: 10.0,
            w_joints: 1.0,
            w_pen: 1e4,
            w_spen: 10.0,
        }
    }
}

impl EnergyWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.w_fc,
            self.w_dis,
            self.w_joints,
            self.w_pen,
            self.w_spen,
        ];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "energy weights must be finite and nonnegative: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub e_fc: f64,
    pub e_dis: f64,
    pub e_joints: f64,
    pub e_pen: f64,
    pub e_spen: f64,
    pub total: f64,
    /// Contact candidates within the activation threshold.
    pub active_contacts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub steps: usize,
    pub step_size_t: f64,
    pub step_size_rot: f64,
    pub step_size_theta: f64,
    /// Per-step caps: translation norm (m), rotation angle (rad) and each
    /// joint (rad).
    pub max_step_t: f64,
    pub max_step_rot: f64,
    pub max_step_theta: f64,
    /// Step sizes and caps shrink geometrically to this fraction of their
    /// initial value by the last step (1 keeps them constant).
    pub step_decay: f64,
    pub fd_epsilon: f64,
    pub anneal_noise_sigma: f64,
    /// Contact activation threshold τ (m).
    pub contact_threshold: f64,
    /// Hull inflation (m); `None` means 0.15 of the target's bounding radius.
    pub inflate_delta: Option<f64>,
    pub init_sigma_t: f64,
    pub init_sigma_rot: f64,
    pub init_sigma_theta: f64,
    /// Keep joints at their initial values (only the wrist moves).
    pub freeze_joints: bool,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            steps: 400,
            step_size_t: 1e-5,
            step_size_rot: 1e-3,
            step_size_theta: 1e-3,
            max_step_t: 2e-3,
            max_step_rot: 0.03,
            max_step_theta: 0.05,
            step_decay: 0.01,
            fd_epsilon: 1e-5,
            anneal_noise_sigma: 0.0,
            contact_threshold: 0.005,
            inflate_delta: None,
            init_sigma_t: 0.005,
            init_sigma_rot: 0.1,
            init_sigma_theta: 0.1,
            freeze_joints: false,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_size_t", self.step_size_t),
            ("step_size_rot", self.step_size_rot),
            ("step_size_theta", self.step_size_theta),
            ("max_step_t", self.max_step_t),
            ("max_step_rot", self.max_step_rot),
            ("max_step_theta", self.max_step_theta),
            ("step_decay", self.step_decay),
            ("fd_epsilon", self.fd_epsilon),
            ("contact_threshold", self.contact_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("anneal_noise_sigma", self.anneal_noise_sigma),
            ("init_sigma_t", self.init_sigma_t),
            ("init_sigma_rot", self.init_sigma_rot),
            ("init_sigma_theta", self.init_sigma_theta),
            ("inflate_delta", self.inflate_delta.unwrap_or(0.0)),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn inflate_delta_for(&self, target: &TriangleMesh) -> f64 {
        self.inflate_delta
            .unwrap_or_else(|| 0.15 * target.bounding_sphere().1)
    }
}

/// Energy trace as CSV, one row per entry (row 0 is the initial pose).
pub fn trace_csv(trace: &[EnergyBreakdown]) -> String {
    let mut s = String::from("step,e_fc,e_dis,e_joints,e_pen,e_spen,total\n");
    for (i, e) in trace.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{}",
            e.e_fc, e.e_dis, e.e_joints, e.e_pen, e.e_spen, e.total
        );
    }
    s
}
