use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::bps::{BasisPointSet, BpsEncoding};
use super::net::{Adam, Mlp};
use super::schedule::{noised, NoiseSchedule};
use crate::error::{Error, Result};
use crate::{par, rng};

const PROBE_STREAM: u64 = u64::MAX;
/// Small datasets cycle through examples until the probe has this many draws.
const MIN_PROBE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    /// The rate follows a cosine from `learning_rate` down to this fraction
    /// of it at the last epoch.
    pub final_lr_fraction: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Width of the sinusoidal step embedding (even).
    pub time_dim: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![256, 256, 256],
            learning_rate: 2e-3,
            final_lr_fraction: 0.0,
            epochs: 4000,
            batch_size: 64,
            time_dim: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layers must be non-empty"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "bad learning rate {}",
                self.learning_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return Err(Error::invalid("final_lr_fraction must be in [0, 1]"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be at least 1"));
        }
        if self.time_dim == 0 || !self.time_dim.is_multiple_of(2) {
            return Err(Error::invalid("time_dim must be a positive even number"));
        }
        Ok(())
    }
}

/// One training pair: a grasp vector and the BPS encoding of its object.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub grasp: Vec<f64>,
    pub condition: BpsEncoding,
}

/// `[sin(t f_k), cos(t f_k)]` with frequencies geometric from 1 to 1/1000.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for k in 0..half {
        let f = (-(1000f64.ln()) * k as f64 / half.max(1) as f64).exp();
        out.push((t as f64 * f).sin());
    }
    for k in 0..half {
        let f = (-(1000f64.ln()) * k as f64 / half.max(1) as f64).exp();
        out.push((t as f64 * f).cos());
    }
    out
}

/// Trained noise predictor plus everything needed to sample from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub net: Mlp,
    pub time_dim: usize,
    pub basis: BasisPointSet,
    pub schedule: NoiseSchedule,
    /// Per-coordinate normalization of grasp vectors.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Denoiser {
    pub fn grasp_dim(&self) -> usize {
        self.mean.len()
    }

    fn input_column(&self, x: &[f64], condition: &[f64], t: usize) -> Vec<f64> {
        let mut col = Vec::with_capacity(self.net.input_dim());
        col.extend_from_slice(x);
        col.extend(condition.iter().map(|d| d / self.basis.radius));
        col.extend(time_embedding(t, self.time_dim));
        col
    }

    /// Predicted noise for a normalized `x` at step `t`.
    pub fn predict(&self, x: &[f64], condition: &BpsEncoding, t: usize) -> Vec<f64> {
        let col = self.input_column(x, &condition.distances, t);
        let input = DMatrix::from_column_slice(col.len(), 1, &col);
        self.net.forward(&input).as_slice().to_vec()
    }

    pub fn normalize(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn denormalize(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| x * s + m)
            .collect()
    }

    fn check_condition(&self, condition: &BpsEncoding) -> Result<()> {
        if condition.distances.len() != self.basis.points.len() {
            return Err(Error::invalid(format!(
                "condition has {} distances, model expects {}",
                condition.distances.len(),
                self.basis.points.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: Denoiser,
    /// Loss on a fixed probe set (one seeded step and noise draw per
    /// example, at least 64 draws) after each epoch.
    pub loss_trace: Vec<f64>,
}

fn normalization(examples: &[TrainingExample], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = examples.len() as f64;
    let mut mean = vec![0.0; dim];
    for e in examples {
        for (m, x) in mean.iter_mut().zip(&e.grasp) {
            *m += x / n;
        }
    }
    let mut std = vec![0.0; dim];
    for e in examples {
        for ((s, x), m) in std.iter_mut().zip(&e.grasp).zip(&mean) {
            *s += (x - m) * (x - m) / n;
        }
    }
    for s in std.iter_mut() {
        *s = if *s > 1e-12 { s.sqrt() } else { 1.0 };
    }
    (mean, std)
}

fn normals<R: Rng>(r: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

/// Minibatch Adam on the noise-prediction error at uniformly drawn steps.
/// Epoch `e` shuffles and draws from `rng::stream(config.seed, &[e])`. An
/// epoch visits every example once, or cycles the shuffled order to fill a
/// single batch when there are fewer examples than `batch_size`.
pub fn train(
    examples: &[TrainingExample],
    basis: &BasisPointSet,
    schedule: &NoiseSchedule,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    let first = examples
        .first()
        .ok_or_else(|| Error::empty("no training examples"))?;
    let dim = first.grasp.len();
    let n_b = basis.points.len();
    for (i, e) in examples.iter().enumerate() {
        if e.grasp.len() != dim || e.condition.distances.len() != n_b {
            return Err(Error::invalid(format!(
                "example {i} has mismatched dimensions"
            )));
        }
        if e.grasp
            .iter()
            .chain(&e.condition.distances)
            .any(|x| !x.is_finite())
        {
            return Err(Error::invalid(format!(
                "example {i} has non-finite entries"
            )));
        }
    }
    let mut sizes = vec![dim + n_b + config.time_dim];
    sizes.extend(&config.hidden);
    sizes.push(dim);
    let (mean, std) = normalization(examples, dim);
    let mut model = Denoiser {
        net: Mlp::new(&sizes, rng::stream_seed(config.seed, &[PROBE_STREAM - 1]))?,
        time_dim: config.time_dim,
        basis: basis.clone(),
        schedule: schedule.clone(),
        mean,
        std,
    };
    let x0: Vec<Vec<f64>> = examples.iter().map(|e| model.normalize(&e.grasp)).collect();
    let steps = schedule.steps();

    let batch = |model: &Denoiser, items: &[(usize, usize, Vec<f64>)]| {
        let rows = model.net.input_dim();
        let mut input = DMatrix::zeros(rows, items.len());
        let mut target = DMatrix::zeros(dim, items.len());
        for (c, (i, t, eps)) in items.iter().enumerate() {
            let xt = noised(&x0[*i], eps, schedule.alpha_bar(*t));
            let col = model.input_column(&xt, &examples[*i].condition.distances, *t);
            input.column_mut(c).copy_from_slice(&col);
            target.column_mut(c).copy_from_slice(eps);
        }
        (input, target)
    };

    let mut probe_rng = rng::stream(config.seed, &[PROBE_STREAM]);
    let probe: Vec<(usize, usize, Vec<f64>)> = (0..examples.len().max(MIN_PROBE))
        .map(|k| {
            let t = probe_rng.gen_range(1..=steps);
            (k % examples.len(), t, normals(&mut probe_rng, dim))
        })
        .collect();

    let mut params = model.net.params();
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut loss_trace = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..config.epochs {
        let progress = if config.epochs > 1 {
            epoch as f64 / (config.epochs - 1) as f64
        } else {
            0.0
        };
        let floor = config.final_lr_fraction;
        adam.learning_rate = config.learning_rate
            * (floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        let mut r = rng::stream(config.seed, &[epoch as u64]);
        order.shuffle(&mut r);
        // Datasets smaller than a batch still fill one batch per epoch.
        let draws: Vec<usize> = order
            .iter()
            .copied()
            .cycle()
            .take(order.len().max(config.batch_size))
            .collect();
        for chunk in draws.chunks(config.batch_size) {
            let items: Vec<(usize, usize, Vec<f64>)> = chunk
                .iter()
                .map(|&i| {
                    let t = r.gen_range(1..=steps);
                    (i, t, normals(&mut r, dim))
                })
                .collect();
            let (input, target) = batch(&model, &items);
            let (_, grad) = model.net.loss_and_gradient(&input, &target);
            adam.step(&mut params, &grad);
            model
                .net
                .set_params(&params)
                .map_err(|_| Error::invalid(format!("training diverged in epoch {}", epoch + 1)))?;
        }
        let (input, target) = batch(&model, &probe);
        let out = model.net.forward(&input);
        let loss = (out - target).norm_squared() / (dim * probe.len()) as f64;
        log::debug!("epoch {} probe loss {loss:.6}", epoch + 1);
        loss_trace.push(loss);
    }
    Ok(TrainOutput { model, loss_trace })
}

/// Ancestral denoising of `dim` coordinates. Draws the start `x_T` and then
/// one noise vector per step `T..=2` from `rng::seeded(seed)`, in that
/// order; step 1 adds no noise.
pub fn ancestral_sample(
    schedule: &NoiseSchedule,
    dim: usize,
    seed: u64,
    mut predict: impl FnMut(&[f64], usize) -> Vec<f64>,
) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    let mut x = normals(&mut r, dim);
    for t in (1..=schedule.steps()).rev() {
        let eps = predict(&x, t);
        let beta = schedule.beta(t);
        let coef = beta / (1.0 - schedule.alpha_bar(t)).sqrt();
        let scale = 1.0 / (1.0 - beta).sqrt();
        for (xi, ei) in x.iter_mut().zip(&eps) {
            *xi = scale * (*xi - coef * ei);
        }
        if t > 1 {
            let sigma = schedule.posterior_variance(t).sqrt();
            for (xi, z) in x.iter_mut().zip(normals(&mut r, dim)) {
                *xi += sigma * z;
            }
        }
    }
    x
}

/// One grasp vector (in grasp units) conditioned on `condition`.
pub fn sample(model: &Denoiser, condition: &BpsEncoding, seed: u64) -> Result<Vec<f64>> {
    model.check_condition(condition)?;
    let x = ancestral_sample(&model.schedule, model.grasp_dim(), seed, |x, t| {
        model.predict(x, condition, t)
    });
    Ok(model.denormalize(&x))
}

/// `count` samples; sample `i` uses seed `rng::stream_seed(seed, &[i])`.
pub fn sample_batch(
    model: &Denoiser,
    condition: &BpsEncoding,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    model.check_condition(condition)?;
    par::map_range(count, |i| {
        sample(model, condition, rng::stream_seed(seed, &[i as u64]))
    })
    .into_iter()
    .collect()
}
