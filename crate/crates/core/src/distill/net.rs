//! Fully connected network with SiLU hidden activations and a linear output,
//! trained by reverse accumulation and Adam.
//!
//! Batches are matrices with one sample per column.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// `weights[l]` maps layer `l` to `l + 1` (rows = outputs).
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
}

impl Mlp {
    /// Uniform Glorot initialization, zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("bad layer sizes {sizes:?}")));
        }
        let mut r = rng::seeded(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| {
                r.gen_range(-limit..limit)
            }));
            biases.push(DVector::zeros(fan_out));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// All parameters, per layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for i in 0..w.nrows() {
                out.extend(w.row(i).iter());
            }
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite network parameter"));
        }
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for i in 0..w.nrows() {
                for j in 0..w.ncols() {
                    w[(i, j)] = params[k];
                    k += 1;
                }
            }
            for v in b.iter_mut() {
                *v = params[k];
                k += 1;
            }
        }
        Ok(())
    }

    /// Pre-activations of every layer.
    fn pass(&self, input: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let last = self.weights.len() - 1;
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut act = input.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * &act;
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if l < last {
                act = z.map(silu);
            }
            pre.push(z);
        }
        pre
    }

    pub fn forward(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        self.pass(input).pop().expect("at least one layer")
    }

    /// Mean squared error over every output entry, and its gradient in
    /// [`Mlp::params`] order.
    pub fn loss_and_gradient(
        &self,
        input: &DMatrix<f64>,
        target: &DMatrix<f64>,
    ) -> (f64, Vec<f64>) {
        let pre = self.pass(input);
        let out = pre.last().expect("at least one layer");
        let diff = out - target;
        let count = diff.len() as f64;
        let loss = diff.norm_squared() / count;

        let layers = self.weights.len();
        let mut grads_w = vec![DMatrix::zeros(0, 0); layers];
        let mut grads_b = vec![DVector::zeros(0); layers];
        let mut delta = diff * (2.0 / count);
        for l in (0..layers).rev() {
            let below = if l == 0 {
                input.clone()
            } else {
                pre[l - 1].map(silu)
            };
            grads_w[l] = &delta * below.transpose();
            grads_b[l] = delta.column_sum();
            if l > 0 {
                let back = self.weights[l].transpose() * &delta;
                delta = back.component_mul(&pre[l - 1].map(silu_grad));
            }
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (w, b) in grads_w.iter().zip(&grads_b) {
            for i in 0..w.nrows() {
                flat.extend(w.row(i).iter());
            }
            flat.extend(b.iter());
        }
        (loss, flat)
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}
