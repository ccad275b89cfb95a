use nalgebra::Point3;

use super::{FaceTally, MaskObservation, UsefulRegion};
use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;

/// Splits `counts` into two groups by exhaustive 1-D 2-means over sorted
/// split points and flags the members of the group with the larger mean.
/// Only splits between distinct values are considered; equal SSE goes to the
/// lower split. All-equal input keeps everything.
pub fn two_means_keep(counts: &[usize]) -> Vec<bool> {
    let mut sorted: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut prefix = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + sorted[i];
        prefix_sq[i + 1] = prefix_sq[i] + sorted[i] * sorted[i];
    }
    let sse = |a: usize, b: usize| {
        let m = (b - a) as f64;
        let s = prefix[b] - prefix[a];
        (prefix_sq[b] - prefix_sq[a]) - s * s / m
    };
    let mut best: Option<(f64, f64)> = None;
    for split in 1..n {
        if sorted[split - 1] == sorted[split] {
            continue;
        }
        let cost = sse(0, split) + sse(split, n);
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, sorted[split]));
        }
    }
    match best {
        None => vec![true; n],
        Some((_, threshold)) => counts.iter().map(|&c| c as f64 >= threshold).collect(),
    }
}

/// Drops observations whose mask size falls in the small-mask cluster.
pub fn filter_two_means(observations: &[MaskObservation]) -> Vec<&MaskObservation> {
    let counts: Vec<usize> = observations.iter().map(|o| o.pixel_count()).collect();
    observations
        .iter()
        .zip(two_means_keep(&counts))
        .filter_map(|(o, keep)| keep.then_some(o))
        .collect()
}

/// Votes each point onto its closest face.
pub fn tally_faces(mesh: &TriangleMesh, points: &[Point3<f64>]) -> FaceTally {
    let mut tally = FaceTally::zeros(mesh.face_count());
    for p in points {
        tally.counts[mesh.closest(p).face] += 1;
    }
    tally
}

/// Picks the most-voted faces.
///
/// The budget is `ceil(fraction · k)` for a mesh of `k` faces, and only
/// faces with at least one vote are eligible, so a region covering less
/// than `fraction` of the mesh is returned whole. Ranking is by count
/// descending, then lowest face index.
pub fn select_useful_region(label: &str, tally: &FaceTally, fraction: f64) -> Result<UsefulRegion> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "selection fraction must be in (0, 1], got {fraction}"
        )));
    }
    let mut voted: Vec<usize> = (0..tally.counts.len())
        .filter(|&f| tally.counts[f] > 0)
        .collect();
    if voted.is_empty() {
        return Err(Error::empty(format!(
            "no faces received votes for {label:?}"
        )));
    }
    voted.sort_by(|&a, &b| tally.counts[b].cmp(&tally.counts[a]).then(a.cmp(&b)));
    let budget = (fraction * tally.counts.len() as f64).ceil() as usize;
    voted.truncate(budget.max(1));
    voted.sort_unstable();
    Ok(UsefulRegion {
        label: label.to_string(),
        face_indices: voted,
        tally: tally.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    fn obs(count: usize, idx: usize) -> MaskObservation {
        let mut mask = vec![false; 2000];
        mask[..count].iter_mut().for_each(|m| *m = true);
        MaskObservation::new(idx, "part", 40, 50, mask).unwrap()
    }

    #[test]
    fn two_means_examples() {
        assert_eq!(
            two_means_keep(&[1000, 950, 980, 40]),
            vec![true, true, true, false]
        );
        assert_eq!(two_means_keep(&[500, 500, 500]), vec![true; 3]);
        assert_eq!(two_means_keep(&[7]), vec![true]);
        let all = [obs(1000, 0), obs(950, 1), obs(980, 2), obs(40, 3)];
        let kept: Vec<usize> = filter_two_means(&all)
            .iter()
            .map(|o| o.view_index)
            .collect();
        assert_eq!(kept, vec![0, 1, 2]);
    }

    /// Exhaustive over every threshold partition; independent of the
    /// prefix-sum path.
    fn brute_keep(counts: &[usize]) -> Vec<bool> {
        let mut values: Vec<usize> = counts.to_vec();
        values.sort_unstable();
        values.dedup();
        if values.len() < 2 {
            return vec![true; counts.len()];
        }
        let mut best = (f64::INFINITY, 0);
        for &thr in &values[1..] {
            let (lo, hi): (Vec<f64>, Vec<f64>) = {
                let lo = counts
                    .iter()
                    .filter(|&&c| c < thr)
                    .map(|&c| c as f64)
                    .collect();
                let hi = counts
                    .iter()
                    .filter(|&&c| c >= thr)
                    .map(|&c| c as f64)
                    .collect();
                (lo, hi)
            };
            let var = |v: &Vec<f64>| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
            };
            let cost = var(&lo) + var(&hi);
            if cost < best.0 - 1e-9 {
                best = (cost, thr);
            }
        }
        counts.iter().map(|&c| c >= best.1).collect()
    }

    #[test]
    fn two_means_matches_exhaustive_partition() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(4);
        for _ in 0..300 {
            let n = rng.gen_range(1..12);
            let counts: Vec<usize> = (0..n).map(|_| rng.gen_range(0..50) * 37).collect();
            assert_eq!(two_means_keep(&counts), brute_keep(&counts), "{counts:?}");
        }
    }

    #[test]
    fn duplicating_observations_keeps_the_same_values() {
        let counts = [812, 40, 655, 0, 913, 37, 700];
        let once = two_means_keep(&counts);
        let doubled: Vec<usize> = counts.iter().chain(counts.iter()).copied().collect();
        let twice = two_means_keep(&doubled);
        assert_eq!(&twice[..7], &once[..]);
        assert_eq!(&twice[7..], &once[..]);
    }

    #[test]
    fn tally_basics() {
        let cube = shapes::cube(1.0);
        let t = tally_faces(&cube, &[cube.face_centroid(5)]);
        assert_eq!(t.counts[5], 1);
        assert_eq!(t.total(), 1);
        assert_eq!(tally_faces(&cube, &[]).total(), 0);
    }

    #[test]
    fn selection_rules() {
        let t = FaceTally {
            counts: vec![10, 5, 1],
        };
        assert_eq!(
            select_useful_region("x", &t, 0.6).unwrap().face_indices,
            vec![0, 1]
        );
        let t = FaceTally {
            counts: vec![3; 10],
        };
        assert_eq!(
            select_useful_region("x", &t, 0.6).unwrap().face_indices,
            vec![0, 1, 2, 3, 4, 5]
        );
        let z = FaceTally::zeros(4);
        assert!(matches!(
            select_useful_region("x", &z, 0.6),
            Err(Error::Empty(_))
        ));
        assert!(select_useful_region("x", &t, 0.0).is_err());
        // Fewer voted faces than the budget: all voted faces, no unvoted ones.
        let sparse = FaceTally {
            counts: vec![0, 4, 0, 0, 1, 0, 0, 0, 0, 0],
        };
        assert_eq!(
            select_useful_region("x", &sparse, 0.6)
                .unwrap()
                .face_indices,
            vec![1, 4]
        );
    }

    #[test]
    fn selection_is_monotone_in_fraction() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(8);
        let t = FaceTally {
            counts: (0..60).map(|_| rng.gen_range(0..6)).collect(),
        };
        let mut prev: Vec<usize> = Vec::new();
        for k in 1..=20 {
            let sel = select_useful_region("x", &t, k as f64 / 20.0)
                .unwrap()
                .face_indices;
            assert!(prev.iter().all(|f| sel.contains(f)));
            prev = sel;
        }
    }
}
