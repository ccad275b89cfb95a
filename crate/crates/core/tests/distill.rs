use nalgebra::{DMatrix, Point3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use semgrasp::distill::*;
use semgrasp::hand::GraspPose;
use semgrasp::{rng, Error};

#[test]
fn single_basis_point_lies_in_the_ball() {
    let b = generate_basis(1, 0.3, 4).unwrap();
    assert_eq!(b.points.len(), 1);
    assert!(b.points[0].coords.norm() <= 0.3);
    assert!(generate_basis(0, 0.3, 4).is_err());
}

#[test]
fn basis_is_seeded() {
    assert_eq!(
        generate_basis(64, 0.2, 9).unwrap(),
        generate_basis(64, 0.2, 9).unwrap()
    );
    assert_ne!(
        generate_basis(64, 0.2, 9).unwrap(),
        generate_basis(64, 0.2, 10).unwrap()
    );
}

#[test]
fn basis_mean_norm_matches_uniform_ball() {
    let r = 0.3;
    let b = generate_basis(4096, r, 1).unwrap();
    assert!(b.points.iter().all(|p| p.coords.norm() <= r));
    let mean = b.points.iter().map(|p| p.coords.norm()).sum::<f64>() / 4096.0;
    assert!(
        (mean - 0.75 * r).abs() <= 0.02 * 0.75 * r,
        "mean norm {mean}"
    );
}

#[test]
fn encoding_of_a_cloud_containing_the_basis_is_zero() {
    let b = generate_basis(32, 0.2, 3).unwrap();
    let mut cloud = b.points.clone();
    cloud.push(Point3::new(1.0, 1.0, 1.0));
    let e = encode(&b, &cloud).unwrap();
    assert!(e.distances.iter().all(|&d| d == 0.0));
}

#[test]
fn single_point_cloud_gives_plain_distances() {
    let b = generate_basis(16, 0.2, 3).unwrap();
    let p = Point3::new(0.05, -0.02, 0.1);
    let e = encode(&b, &[p]).unwrap();
    for (d, q) in e.distances.iter().zip(&b.points) {
        assert_eq!(*d, (q - p).norm());
    }
    assert!(matches!(encode(&b, &[]), Err(Error::Empty(_))));
}

fn cloud_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-0.3..0.3f64, -0.3..0.3f64, -0.3..0.3f64), 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encoding_ignores_point_order(raw in cloud_strategy(), seed in any::<u64>()) {
        let b = generate_basis(24, 0.25, 5).unwrap();
        let cloud: Vec<Point3<f64>> = raw.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
        let mut shuffled = cloud.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng::seeded(seed));
        prop_assert_eq!(encode(&b, &cloud).unwrap(), encode(&b, &shuffled).unwrap());
    }

    #[test]
    fn shifting_the_cloud_moves_distances_by_at_most_the_shift(
        raw in cloud_strategy(),
        v in (-0.1..0.1f64, -0.1..0.1f64, -0.1..0.1f64),
    ) {
        let b = generate_basis(24, 0.25, 5).unwrap();
        let shift = Vector3::new(v.0, v.1, v.2);
        let cloud: Vec<Point3<f64>> = raw.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
        let moved: Vec<Point3<f64>> = cloud.iter().map(|p| p + shift).collect();
        let a = encode(&b, &cloud).unwrap();
        let c = encode(&b, &moved).unwrap();
        for (x, y) in a.distances.iter().zip(&c.distances) {
            prop_assert!((x - y).abs() <= shift.norm() + 1e-12);
        }
    }

    #[test]
    fn grasp_vectors_round_trip(
        t in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
        w in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64),
        joints in prop::collection::vec(-1.5..1.5f64, 16),
    ) {
        let g = GraspPose::new(Vector3::new(t.0, t.1, t.2), UnitQuaternion::from_scaled_axis(Vector3::new(w.0, w.1, w.2)), joints);
        let v = grasp_to_vector(&g);
        prop_assert_eq!(v.len(), 25);
        let back = vector_to_grasp(&v).unwrap();
        prop_assert!((back.translation - g.translation).norm() < 1e-6);
        prop_assert!(back.rotation.angle_to(&g.rotation) < 1e-6);
        prop_assert_eq!(back.joints, g.joints);
    }

    #[test]
    fn decoded_rotations_are_proper(raw in prop::collection::vec(-2.0..2.0f64, 25)) {
        if let Ok(g) = vector_to_grasp(&raw) {
            let r = g.rotation.to_rotation_matrix().into_inner();
            prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn identity_rotation_encodes_to_unit_columns() {
    let v = grasp_to_vector(&GraspPose::identity(16));
    assert_eq!(&v[3..9], &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
}

#[test]
fn perturbed_vector_decodes_orthonormal() {
    let g = GraspPose::new(
        Vector3::new(0.1, 0.0, 0.0),
        UnitQuaternion::from_euler_angles(0.3, -0.2, 1.0),
        vec![0.2; 16],
    );
    let mut v = grasp_to_vector(&g);
    let mut r = rng::seeded(8);
    for x in v[3..9].iter_mut() {
        *x += r.gen_range(-0.05..0.05);
    }
    let m = vector_to_grasp(&v)
        .unwrap()
        .rotation
        .to_rotation_matrix()
        .into_inner();
    assert!((m.transpose() * m - nalgebra::Matrix3::identity()).norm() < 1e-9);
}

#[test]
fn parallel_columns_are_rejected() {
    let mut v = grasp_to_vector(&GraspPose::identity(16));
    v[6..9].copy_from_slice(&[2.0, 0.0, 0.0]);
    assert!(matches!(vector_to_grasp(&v), Err(Error::Degenerate(_))));
    v[3..6].copy_from_slice(&[0.0, 0.0, 0.0]);
    assert!(matches!(vector_to_grasp(&v), Err(Error::Degenerate(_))));
}

#[test]
fn schedule_is_strictly_decreasing() {
    let s = NoiseSchedule::linear(&ScheduleConfig::default()).unwrap();
    assert_eq!(s.steps(), 100);
    for w in s.alpha_bars().windows(2) {
        assert!(w[1] < w[0] && w[1] > 0.0);
    }
    assert!(s.alpha_bar(100) < 1e-3);
    assert!(NoiseSchedule::new(vec![0.5, 1.0]).is_err());
    assert!(NoiseSchedule::new(vec![]).is_err());
}

fn x0() -> Vec<f64> {
    (0..25).map(|i| (i as f64 * 0.37).sin()).collect()
}

#[test]
fn forward_noise_endpoints() {
    let tiny = NoiseSchedule::new(vec![1e-10, 0.5]).unwrap();
    let (xt, _) = forward_noise(&x0(), 1, &tiny, 3).unwrap();
    for (a, b) in xt.iter().zip(&x0()) {
        assert!((a - b).abs() < 1e-4);
    }
    let s = NoiseSchedule::linear(&ScheduleConfig::default()).unwrap();
    let (xt, eps) = forward_noise(&x0(), 100, &s, 3).unwrap();
    for (a, e) in xt.iter().zip(&eps) {
        assert!((a - e).abs() < 0.01);
    }
    assert!(forward_noise(&x0(), 0, &s, 3).is_err());
    assert!(forward_noise(&x0(), 101, &s, 3).is_err());
}

#[test]
fn forward_noise_moments() {
    let s = NoiseSchedule::linear(&ScheduleConfig::default()).unwrap();
    let t = 20;
    let ab = s.alpha_bar(t);
    let n = 10_000;
    let x = x0();
    let mut mean = [0.0; 25];
    let mut sq = 0.0;
    for seed in 0..n {
        let (xt, _) = forward_noise(&x, t, &s, seed).unwrap();
        for (m, v) in mean.iter_mut().zip(&xt) {
            *m += v / n as f64;
        }
        sq += xt.iter().map(|v| v * v).sum::<f64>() / n as f64;
    }
    let se = ((1.0 - ab) / n as f64).sqrt();
    for (m, v) in mean.iter().zip(&x) {
        assert!(
            (m - ab.sqrt() * v).abs() < 3.0 * se,
            "{m} vs {}",
            ab.sqrt() * v
        );
    }
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    let expected = ab * norm2 + (1.0 - ab) * 25.0;
    let var = 2.0 * 25.0 * (1.0 - ab).powi(2) + 4.0 * ab * (1.0 - ab) * norm2;
    assert!(
        (sq - expected).abs() < 4.0 * (var / n as f64).sqrt(),
        "{sq} vs {expected}"
    );
}

#[test]
fn backprop_matches_finite_differences() {
    let mut r = rng::seeded(12);
    for point in 0..10 {
        let mut net = Mlp::new(&[2, 4, 2], point).unwrap();
        let base: Vec<f64> = net
            .params()
            .iter()
            .map(|p| p + r.gen_range(-0.5..0.5))
            .collect();
        net.set_params(&base).unwrap();
        let input = DMatrix::from_fn(2, 3, |_, _| r.gen_range(-1.0..1.0));
        let target = DMatrix::from_fn(2, 3, |_, _| r.gen_range(-1.0..1.0));
        let (_, grad) = net.loss_and_gradient(&input, &target);
        let h = 1e-6;
        let mut fd = Vec::with_capacity(base.len());
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] += h;
            net.set_params(&p).unwrap();
            let plus = net.loss_and_gradient(&input, &target).0;
            p[k] -= 2.0 * h;
            net.set_params(&p).unwrap();
            let minus = net.loss_and_gradient(&input, &target).0;
            fd.push((plus - minus) / (2.0 * h));
        }
        net.set_params(&base).unwrap();
        let diff: f64 = grad
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = grad.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(
            diff / scale < 1e-4,
            "point {point}: relative error {}",
            diff / scale
        );
    }
}

#[test]
fn params_round_trip_and_reject_nan() {
    let mut net = Mlp::new(&[3, 5, 2], 1).unwrap();
    assert_eq!(net.param_count(), 3 * 5 + 5 + 5 * 2 + 2);
    let p = net.params();
    net.set_params(&p).unwrap();
    assert_eq!(net.params(), p);
    let mut bad = p.clone();
    bad[0] = f64::NAN;
    assert!(net.set_params(&bad).is_err());
    assert!(net.set_params(&p[1..]).is_err());
}

fn toy_examples(n: usize, n_b: usize) -> (Vec<TrainingExample>, BasisPointSet) {
    let basis = generate_basis(n_b, 0.2, 2).unwrap();
    let cloud = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.05, 0.0, 0.0)];
    let condition = encode(&basis, &cloud).unwrap();
    let mut r = rng::seeded(6);
    let examples = (0..n)
        .map(|_| {
            let g = GraspPose::new(
                Vector3::new(
                    r.gen_range(-0.1..0.1),
                    r.gen_range(-0.1..0.1),
                    r.gen_range(-0.1..0.1),
                ),
                UnitQuaternion::from_scaled_axis(Vector3::new(r.gen_range(-1.0..1.0), 0.0, 0.0)),
                (0..16).map(|_| r.gen_range(0.0..1.0)).collect(),
            );
            TrainingExample {
                grasp: grasp_to_vector(&g),
                condition: condition.clone(),
            }
        })
        .collect();
    (examples, basis)
}

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        hidden: vec![32, 32],
        learning_rate: 3e-3,
        final_lr_fraction: 1.0,
        epochs,
        batch_size: 8,
        time_dim: 8,
        seed: 4,
    }
}

#[test]
fn zero_learning_rate_gives_a_flat_trace() {
    let (examples, basis) = toy_examples(20, 8);
    let schedule = NoiseSchedule::linear(&ScheduleConfig::default()).unwrap();
    let config = TrainConfig {
        learning_rate: 0.0,
        ..small_config(5)
    };
    let out = train(&examples, &basis, &schedule, &config).unwrap();
    assert_eq!(out.loss_trace.len(), 5);
    assert!(out.loss_trace.iter().all(|&l| l == out.loss_trace[0]));
}

#[test]
fn single_record_is_memorized() {
    let (examples, basis) = toy_examples(1, 8);
    let schedule = NoiseSchedule::linear(&ScheduleConfig::default()).unwrap();
    let config = TrainConfig {
        epochs: 500,
        ..Default::default()
    };
    let out = train(&examples, &basis, &schedule, &config).unwrap();
    let first = out.loss_trace[0];
    let last = *out.loss_trace.last().unwrap();
    assert!(last < 0.1 * first, "{first} -> {last}");
}

#[test]
fn training_is_reproducible() {
    let (examples, basis) = toy_examples(30, 8);
    let schedule = NoiseSchedule::linear(&ScheduleConfig::default()).unwrap();
    let a = train(&examples, &basis, &schedule, &small_config(4)).unwrap();
    let b = train(&examples, &basis, &schedule, &small_config(4)).unwrap();
    assert_eq!(a.loss_trace, b.loss_trace);
    assert_eq!(a.model, b.model);
    let other = TrainConfig {
        seed: 5,
        ..small_config(4)
    };
    assert_ne!(
        train(&examples, &basis, &schedule, &other)
            .unwrap()
            .loss_trace,
        a.loss_trace
    );
}

#[test]
fn training_rejects_bad_input() {
    let (examples, basis) = toy_examples(3, 8);
    let schedule = NoiseSchedule::linear(&ScheduleConfig::default()).unwrap();
    assert!(train(&[], &basis, &schedule, &small_config(1)).is_err());
    let mut ragged = examples.clone();
    ragged[1].grasp.pop();
    assert!(train(&ragged, &basis, &schedule, &small_config(1)).is_err());
    let odd = TrainConfig {
        time_dim: 3,
        ..small_config(1)
    };
    assert!(train(&examples, &basis, &schedule, &odd).is_err());
}

#[test]
fn zero_noise_prediction_replays_in_closed_form() {
    let s = NoiseSchedule::linear(&ScheduleConfig {
        steps: 10,
        ..Default::default()
    })
    .unwrap();
    let out = ancestral_sample(&s, 5, 77, |x, _| vec![0.0; x.len()]);

    let mut r = rng::seeded(77);
    let draw =
        |r: &mut rng::StreamRng| -> Vec<f64> { (0..5).map(|_| StandardNormal.sample(r)).collect() };
    let mut x = draw(&mut r);
    for t in (1..=10).rev() {
        let scale = 1.0 / (1.0 - s.beta(t)).sqrt();
        x.iter_mut().for_each(|v| *v *= scale);
        if t > 1 {
            let sigma = s.posterior_variance(t).sqrt();
            for (v, z) in x.iter_mut().zip(draw(&mut r)) {
                *v += sigma * z;
            }
        }
    }
    for (a, b) in out.iter().zip(&x) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn sampling_is_seeded_and_checkpoints_round_trip() {
    let (examples, basis) = toy_examples(12, 8);
    let schedule = NoiseSchedule::linear(&ScheduleConfig {
        steps: 20,
        ..Default::default()
    })
    .unwrap();
    let model = train(&examples, &basis, &schedule, &small_config(3))
        .unwrap()
        .model;
    let cond = &examples[0].condition;
    let a = sample(&model, cond, 5).unwrap();
    assert_eq!(a.len(), 25);
    assert_eq!(a, sample(&model, cond, 5).unwrap());
    assert_ne!(a, sample(&model, cond, 6).unwrap());
    let batch = sample_batch(&model, cond, 3, 9).unwrap();
    assert_eq!(
        batch[1],
        sample(&model, cond, rng::stream_seed(9, &[1])).unwrap()
    );
    let short = BpsEncoding {
        distances: vec![0.0; 3],
    };
    assert!(sample(&model, &short, 5).is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    write_checkpoint(&path, &model).unwrap();
    let back = read_checkpoint(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(sample(&back, cond, 5).unwrap(), a);

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(read_checkpoint(&path), Err(Error::Parse { .. })));
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    std::fs::write(&path, &wrong).unwrap();
    assert!(matches!(read_checkpoint(&path), Err(Error::Parse { .. })));
}

#[test]
fn time_embedding_is_bounded() {
    let e = time_embedding(37, 16);
    assert_eq!(e.len(), 16);
    assert!(e.iter().all(|v| v.abs() <= 1.0));
    assert_ne!(time_embedding(1, 16), time_embedding(2, 16));
}
