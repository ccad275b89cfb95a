use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use super::energy::EnergyModel;
use super::{EnergyBreakdown, EnergyWeights, OptimizerConfig, SceneContext};
use crate::error::Result;
use crate::hand::{GraspPose, HandModel};
use crate::{par, rng};

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    /// Lowest-energy iterate seen, including the initial pose.
    pub grasp: GraspPose,
    pub energy: EnergyBreakdown,
    /// Energy at every iterate; entry 0 is the initial pose.
    pub trace: Vec<EnergyBreakdown>,
}

fn clip_norm(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

fn noise3<R: Rng>(rng: &mut R, sigma: f64) -> Vector3<f64> {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Vector3::new(x, y, z) * sigma
}

/// Gradient descent with per-group step sizes and caps.
///
/// With `anneal_noise_sigma > 0`, Gaussian noise with standard deviation
/// `anneal_noise_sigma · (1 − t/steps)` times each group's step cap is added
/// before step `t`. Noise draws come from `rng::seeded(config.seed)`.
pub fn optimize(
    scene: &SceneContext,
    hand: &HandModel,
    init: &GraspPose,
    weights: &EnergyWeights,
    config: &OptimizerConfig,
) -> Result<OptimizeResult> {
    config.validate()?;
    weights.validate()?;
    hand.check_pose(init)?;
    let model = EnergyModel::new(scene, hand, weights, config.contact_threshold);
    let mut noise = rng::seeded(config.seed);
    let mut current = init.clone();
    let first = model.eval(&current);
    let mut trace = vec![first];
    let mut best = (current.clone(), first);
    let dof = hand.dof();

    for t in 0..config.steps {
        let sigma = config.anneal_noise_sigma * (1.0 - t as f64 / config.steps as f64);
        if sigma > 0.0 {
            current.translation += noise3(&mut noise, sigma * config.max_step_t);
            current.rotation *=
                UnitQuaternion::from_scaled_axis(noise3(&mut noise, sigma * config.max_step_rot));
            if !config.freeze_joints {
                for q in current.joints.iter_mut() {
                    *q += sigma * config.max_step_theta * noise.sample::<f64, _>(StandardNormal);
                }
            }
        }
        let decay = config.step_decay.powf(t as f64 / config.steps as f64);
        let g = model.gradient(&current, config.fd_epsilon, config.freeze_joints);
        let dt = clip_norm(
            -decay * config.step_size_t * Vector3::new(g[0], g[1], g[2]),
            decay * config.max_step_t,
        );
        let dw = clip_norm(
            -decay * config.step_size_rot * Vector3::new(g[3], g[4], g[5]),
            decay * config.max_step_rot,
        );
        current.translation += dt;
        current.rotation *= UnitQuaternion::from_scaled_axis(dw);
        current.rotation.renormalize();
        if !config.freeze_joints {
            for j in 0..dof {
                let cap = decay * config.max_step_theta;
                let step = (-decay * config.step_size_theta * g[6 + j]).clamp(-cap, cap);
                current.joints[j] += step;
            }
        }
        hand.clamp_joints(&mut current.joints);
        let e = model.eval(&current);
        trace.push(e);
        if e.total < best.1.total {
            best = (current.clone(), e);
        }
    }
    Ok(OptimizeResult {
        grasp: best.0,
        energy: best.1,
        trace,
    })
}

/// Optimizes each init independently; init `i` uses noise seed
/// `rng::stream_seed(config.seed, &[i])`.
pub fn optimize_batch(
    scene: &SceneContext,
    hand: &HandModel,
    inits: &[GraspPose],
    weights: &EnergyWeights,
    config: &OptimizerConfig,
) -> Result<Vec<OptimizeResult>> {
    par::map(inits, |i, init| {
        let cfg = OptimizerConfig {
            seed: rng::stream_seed(config.seed, &[i as u64]),
            ..config.clone()
        };
        optimize(scene, hand, init, weights, &cfg)
    })
    .into_iter()
    .collect()
}
