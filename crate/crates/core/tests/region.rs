use std::collections::HashSet;
use std::f64::consts::PI;

use nalgebra::Point3;
use proptest::prelude::*;
use rand::Rng;
use semgrasp::geometry::{closest_brute_force, raycast_brute_force, shapes, TriangleMesh};
use semgrasp::region::*;
use semgrasp::rng;

fn ring(n: usize, px: usize, seed: u64) -> Vec<Viewpoint> {
    sample_viewpoints(
        n,
        CameraSurface::Sphere,
        3.0,
        Point3::origin(),
        Intrinsics::framing(px, px, 1.0, 3.0),
        seed,
    )
    .unwrap()
}

fn planted_cap(mesh: &TriangleMesh, z_min: f64) -> Vec<usize> {
    (0..mesh.face_count())
        .filter(|&f| mesh.face_centroid(f).z > z_min)
        .collect()
}

#[test]
fn lattice_separation_beats_nine_tenths_of_cell_spacing() {
    let n = 100;
    let views = sample_viewpoints(
        n,
        CameraSurface::Sphere,
        1.0,
        Point3::origin(),
        Intrinsics::framing(8, 8, 0.5, 1.0),
        17,
    )
    .unwrap();
    let mut min = f64::INFINITY;
    for i in 0..n {
        for j in 0..i {
            min = min.min(
                views[i]
                    .camera_position
                    .coords
                    .angle(&views[j].camera_position.coords),
            );
        }
    }
    // Side of a square cell when the sphere is split into n equal areas.
    let spacing = (4.0 * PI / n as f64).sqrt();
    assert!(min > 0.9 * spacing, "min {min} vs spacing {spacing}");
}

#[test]
fn viewpoints_are_seed_deterministic() {
    assert_eq!(ring(12, 8, 4), ring(12, 8, 4));
    assert_ne!(ring(12, 8, 4), ring(12, 8, 5));
}

#[test]
fn render_matches_per_pixel_raycast() {
    let sphere = shapes::icosphere(2, 1.0);
    for view in ring(3, 64, 2) {
        let img = render_visible_faces(&sphere, &view);
        for row in 0..64 {
            for col in 0..64 {
                let hit =
                    raycast_brute_force(&sphere, &view.camera_position, &view.pixel_ray(col, row));
                assert_eq!(img.get(col, row), hit.map(|h| h.face_index as u32));
            }
        }
    }
}

#[test]
fn oracle_corruption_replays_the_seeded_stream() {
    let sphere = shapes::icosphere(2, 1.0);
    let views = ring(20, 32, 1);
    let seed = 99;
    let masks = synthetic_oracle_masks(
        &sphere,
        &planted_cap(&sphere, 0.0),
        &views,
        0.25,
        seed,
        "cap",
    )
    .unwrap();
    let expected: Vec<bool> = (0..20)
        .map(|i| rng::stream(seed, &[i as u64]).gen::<f64>() < 0.25)
        .collect();
    assert_eq!(oracle_corruption(20, 0.25, seed), expected);
    assert!(expected.iter().any(|&c| c) && expected.iter().any(|&c| !c));
    for (i, m) in masks.iter().enumerate() {
        let clean = render_visible_faces(&sphere, &views[i]);
        let region: HashSet<usize> = planted_cap(&sphere, 0.0).into_iter().collect();
        let want: Vec<bool> = clean
            .faces
            .iter()
            .map(|f| f.is_some_and(|f| region.contains(&(f as usize))))
            .collect();
        assert_eq!(m.mask() != &want[..], expected[i], "view {i}");
    }
    let again = synthetic_oracle_masks(
        &sphere,
        &planted_cap(&sphere, 0.0),
        &views,
        0.25,
        seed,
        "cap",
    )
    .unwrap();
    assert_eq!(masks, again);
}

#[test]
fn silhouette_deprojection_counts_and_surface() {
    let sphere = shapes::icosphere(2, 1.0);
    let all: Vec<usize> = (0..sphere.face_count()).collect();
    let views = ring(4, 48, 3);
    let masks = synthetic_oracle_masks(&sphere, &all, &views, 0.0, 0, "all").unwrap();
    for (v, m) in views.iter().zip(&masks) {
        let pts = deproject_mask(&sphere, v, m).unwrap();
        assert_eq!(pts.len(), render_visible_faces(&sphere, v).foreground());
        for p in &pts {
            assert!(sphere.signed_distance(p).signed_distance.abs() < 1e-6);
        }
    }
}

#[test]
fn tally_of_deprojected_points_matches_brute_force() {
    let sphere = shapes::icosphere(2, 1.0);
    let all: Vec<usize> = (0..sphere.face_count()).collect();
    let views = ring(6, 40, 8);
    let masks = synthetic_oracle_masks(&sphere, &all, &views, 0.0, 0, "all").unwrap();
    let mut points = Vec::new();
    for (v, m) in views.iter().zip(&masks) {
        points.extend(deproject_mask(&sphere, v, m).unwrap());
    }
    let mut r = rng::seeded(1);
    let sample: Vec<Point3<f64>> = (0..500)
        .map(|_| points[r.gen_range(0..points.len())])
        .collect();
    let tally = tally_faces(&sphere, &sample);
    assert_eq!(tally.total(), 500);
    let mut oracle = vec![0usize; sphere.face_count()];
    for p in &sample {
        oracle[closest_brute_force(&sphere, p).face] += 1;
    }
    assert_eq!(tally.counts, oracle);
}

#[test]
fn noise_free_region_stays_within_one_ring_of_the_plant() {
    let mesh = shapes::uv_sphere(24, 12, 1.0);
    let planted = planted_cap(&mesh, 0.3);
    let views = ring(12, 64, 6);
    let masks = synthetic_oracle_masks(&mesh, &planted, &views, 0.0, 2, "cap").unwrap();
    let region = propose_region(&mesh, &views, &masks, DEFAULT_FRACTION).unwrap();
    let neighbors = mesh.edge_neighbors();
    let mut allowed: HashSet<usize> = planted.iter().copied().collect();
    for &f in &planted {
        allowed.extend(neighbors[f].iter().copied());
    }
    assert!(region.face_indices.iter().all(|f| allowed.contains(f)));
    assert!(region
        .face_indices
        .iter()
        .all(|&f| region.tally.counts[f] >= 1));
}

#[test]
fn planted_region_is_recovered_through_corrupted_views() {
    let mesh = shapes::uv_sphere(50, 21, 1.0);
    assert_eq!(mesh.face_count(), 2000);
    let planted = planted_cap(&mesh, 0.2);
    let views = ring(20, 128, 11);
    let seed = 2024;
    let masks = synthetic_oracle_masks(&mesh, &planted, &views, 0.25, seed, "cap").unwrap();
    let corrupted = oracle_corruption(20, 0.25, seed);
    let kept: HashSet<usize> = filter_two_means(&masks)
        .iter()
        .map(|o| o.view_index)
        .collect();
    assert!((0..20).all(|i| !(corrupted[i] && kept.contains(&i))));
    let region = propose_region(&mesh, &views, &masks, DEFAULT_FRACTION).unwrap();
    let iou = face_iou(&region.face_indices, &planted);
    assert!(iou >= 0.9, "IoU {iou}");
}

#[test]
fn dimension_mismatch_is_rejected() {
    let sphere = shapes::icosphere(1, 1.0);
    let view = ring(1, 16, 0)[0];
    let m = MaskObservation::new(0, "x", 8, 8, vec![true; 64]).unwrap();
    assert!(deproject_mask(&sphere, &view, &m).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tally_merge_is_order_independent(
        parts in prop::collection::vec(prop::collection::vec(0usize..20, 6), 1..6),
        seed in any::<u64>(),
    ) {
        let tallies: Vec<FaceTally> = parts.into_iter().map(|counts| FaceTally { counts }).collect();
        let forward = tallies.iter().try_fold(FaceTally::zeros(6), |acc, t| acc.merge(t)).unwrap();
        let mut shuffled = tallies.clone();
        let mut r = rng::seeded(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, r.gen_range(0..=i));
        }
        let back = shuffled.iter().try_fold(FaceTally::zeros(6), |acc, t| acc.merge(t)).unwrap();
        prop_assert_eq!(forward, back);
    }

    #[test]
    fn selection_grows_with_fraction(
        counts in prop::collection::vec(0usize..5, 1..80),
        a in 0.01f64..1.0,
        b in 0.01f64..1.0,
    ) {
        let tally = FaceTally { counts };
        prop_assume!(tally.total() > 0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = select_useful_region("p", &tally, lo).unwrap().face_indices;
        let large = select_useful_region("p", &tally, hi).unwrap().face_indices;
        prop_assert!(small.iter().all(|f| large.contains(f)));
        prop_assert!(large.iter().all(|&f| tally.counts[f] >= 1));
    }

    #[test]
    fn deprojected_points_lie_on_the_surface(seed in any::<u64>()) {
        let sphere = shapes::icosphere(1, 0.5);
        let views = sample_viewpoints(1, CameraSurface::Dome, 2.0, Point3::origin(), Intrinsics::framing(16, 16, 0.5, 2.0), seed).unwrap();
        let all: Vec<usize> = (0..sphere.face_count()).collect();
        let masks = synthetic_oracle_masks(&sphere, &all, &views, 0.0, seed, "s").unwrap();
        for p in deproject_mask(&sphere, &views[0], &masks[0]).unwrap() {
            prop_assert!(sphere.signed_distance(&p).signed_distance.abs() < 1e-6);
        }
    }
}
