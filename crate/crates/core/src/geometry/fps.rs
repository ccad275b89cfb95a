use nalgebra::Point3;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Greedy farthest point sampling.
///
/// The first index is a seeded uniform draw; each following index maximizes
/// the distance to the already chosen set, with ties going to the lowest
/// index. The first `j` picks do not depend on `k`.
pub fn farthest_point_sampling(points: &[Point3<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cannot pick {k} of {n} points")));
    }
    let first = rng::seeded(seed).gen_range(0..n);
    let mut chosen = Vec::with_capacity(k);
    chosen.push(first);
    let mut min_d2: Vec<f64> = points
        .iter()
        .map(|p| (p - points[first]).norm_squared())
        .collect();
    while chosen.len() < k {
        let mut best = 0;
        for i in 1..n {
            if min_d2[i] > min_d2[best] {
                best = i;
            }
        }
        chosen.push(best);
        let c = points[best];
        for (d, p) in min_d2.iter_mut().zip(points) {
            *d = d.min((p - c).norm_squared());
        }
    }
    Ok(chosen)
}
