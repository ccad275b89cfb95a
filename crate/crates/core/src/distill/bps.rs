use nalgebra::Point3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng;

/// Fixed reference points, uniform in a ball about the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisPointSet {
    pub points: Vec<Point3<f64>>,
    pub radius: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpsEncoding {
    pub distances: Vec<f64>,
}

/// Rejection-samples `n_b` points from the cube around the ball.
pub fn generate_basis(n_b: usize, radius: f64, seed: u64) -> Result<BasisPointSet> {
    if n_b == 0 {
        return Err(Error::invalid("basis needs at least one point"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!(
            "basis radius must be positive, got {radius}"
        )));
    }
    let mut r = rng::seeded(seed);
    let mut points = Vec::with_capacity(n_b);
    while points.len() < n_b {
        let p = Point3::new(
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
        );
        if p.coords.norm_squared() <= 1.0 {
            points.push(p * radius);
        }
    }
    Ok(BasisPointSet {
        points,
        radius,
        seed,
    })
}

/// Distance from each basis point to its nearest cloud point.
pub fn encode(bps: &BasisPointSet, cloud: &[Point3<f64>]) -> Result<BpsEncoding> {
    if cloud.is_empty() {
        return Err(Error::empty("cannot encode an empty point cloud"));
    }
    let distances = par::map(&bps.points, |_, b| {
        cloud
            .iter()
            .map(|p| (p - b).norm_squared())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    });
    Ok(BpsEncoding { distances })
}
