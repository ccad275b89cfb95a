//! Friction-pyramid wrench feasibility.
//!
//! Contact `i` contributes `m_f` pyramid edge forces
//! `-n + mu (cos φ_e t1 + sin φ_e t2)` and the pure normal force `-n`, each
//! with its torque about the reference point. Every edge has unit normal
//! component, so the per-contact sum of multipliers is the normal force,
//! capped at `f_max`. The question is whether some admissible multiplier
//! vector reproduces the required wrench to within `residual_eps`:
//!
//! ```text
//! min ½‖Aλ − b‖²   s.t. λ ≥ 0,  Σ_{e ∈ contact i} λ_e ≤ f_max
//! ```
//!
//! solved by accelerated projected gradient. The run stops as soon as the
//! residual is within tolerance (feasible) or the Frank-Wolfe lower bound on
//! the optimum shows it cannot get there (infeasible).

use std::f64::consts::PI;

use nalgebra::{Matrix6, Point3, Vector3, Vector6};

use super::ContactState;

const MAX_ITERS: usize = 50_000;

/// Columns of the contact wrench matrix, grouped per contact.
pub fn contact_wrenches(
    contacts: &[ContactState],
    origin: &Point3<f64>,
    mu: f64,
    sides: usize,
) -> Vec<Vec<Vector6<f64>>> {
    contacts
        .iter()
        .map(|c| {
            let n = c.normal;
            let helper = if n.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            let t1 = n.cross(&helper).normalize();
            let t2 = n.cross(&t1);
            let arm = c.point - origin;
            let column = |f: Vector3<f64>| {
                let tq = arm.cross(&f);
                Vector6::new(f.x, f.y, f.z, tq.x, tq.y, tq.z)
            };
            let mut cols = Vec::with_capacity(sides + 1);
            for e in 0..sides {
                let phi = 2.0 * PI * e as f64 / sides as f64;
                cols.push(column(-n + mu * (phi.cos() * t1 + phi.sin() * t2)));
            }
            cols.push(column(-n));
            cols
        })
        .collect()
}

/// Euclidean projection onto `{x ≥ 0, Σx ≤ cap}`.
fn project_capped_simplex(x: &mut [f64], cap: f64) {
    for v in x.iter_mut() {
        *v = v.max(0.0);
    }
    let sum: f64 = x.iter().sum();
    if sum <= cap {
        return;
    }
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut shift = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        acc += s;
        let candidate = (acc - cap) / (k + 1) as f64;
        if s - candidate > 0.0 {
            shift = candidate;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - shift).max(0.0);
    }
}

/// Whether the contacts can supply `required` (force; torque about
/// `origin`) with every per-contact normal force at most `f_max`.
pub fn supply_feasible(
    columns: &[Vec<Vector6<f64>>],
    required: &Vector6<f64>,
    f_max: f64,
    eps: f64,
) -> bool {
    let half_eps2 = 0.5 * eps * eps;
    if 0.5 * required.norm_squared() <= half_eps2 {
        return true;
    }
    if columns.is_empty() || f_max <= 0.0 {
        return false;
    }
    let flat: Vec<Vector6<f64>> = columns.iter().flatten().copied().collect();
    let mut gram = Matrix6::zeros();
    for a in &flat {
        gram += a * a.transpose();
    }
    let lipschitz = gram.symmetric_eigenvalues().max().max(1e-300);
    let step = 1.0 / lipschitz;

    let mut x = vec![0.0; flat.len()];
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let apply = |v: &[f64]| -> Vector6<f64> { flat.iter().zip(v).map(|(a, &l)| a * l).sum() };
    for _ in 0..MAX_ITERS {
        // Decide at the current iterate.
        let r = apply(&x) - required;
        let f = 0.5 * r.norm_squared();
        if f <= half_eps2 {
            return true;
        }
        // Frank-Wolfe: the best vertex per contact puts the whole cap on the
        // most descending column, or nothing if none descends.
        let mut gap = 0.0;
        let mut offset = 0;
        for group in columns {
            let mut best = 0.0f64;
            for (k, a) in group.iter().enumerate() {
                let g = a.dot(&r);
                gap += g * x[offset + k];
                best = best.min(g);
            }
            gap -= best * f_max;
            offset += group.len();
        }
        if f - gap > half_eps2 {
            return false;
        }

        let ry = apply(&y) - required;
        let mut next: Vec<f64> = flat
            .iter()
            .zip(&y)
            .map(|(a, &l)| l - step * a.dot(&ry))
            .collect();
        let mut offset = 0;
        for group in columns {
            project_capped_simplex(&mut next[offset..offset + group.len()], f_max);
            offset += group.len();
        }
        let m_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / m_next;
        y = next
            .iter()
            .zip(&x)
            .map(|(n, o)| n + beta * (n - o))
            .collect();
        x = next;
        momentum = m_next;
    }
    let r = apply(&x) - required;
    log::debug!(
        "wrench solve hit the iteration limit at residual {}",
        r.norm()
    );
    0.5 * r.norm_squared() <= half_eps2
}
