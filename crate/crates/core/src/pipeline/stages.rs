use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Point3;

use super::{LoadedScene, PipelineConfig};
use crate::distill::{
    self, encode, generate_basis, grasp_to_vector, vector_to_grasp, BasisPointSet, BpsEncoding,
    Denoiser,
};
use crate::error::{Error, Result};
use crate::eval::{self, EvalConfig, Task};
use crate::geometry::shapes::icosphere;
use crate::geometry::TriangleMesh;
use crate::hand::{forward_kinematics, HandModel, HAND_DOF};
use crate::optimize::{energy, init_grasps, optimize_batch, OptimizerConfig};
use crate::record::{GraspRecord, Provenance};
use crate::region::io::{read_mask_dir, read_region, region_to_string};
use crate::region::{
    propose_region, sample_viewpoints, synthetic_oracle_masks, Intrinsics, UsefulRegion,
};
use crate::{par, rng};

// First index of every seed stream path, one per stage.
const REGION_STREAM: u64 = 0;
const SYNTH_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;

/// Label of records drawn from a trained sampler.
pub const SAMPLED_LABEL: &str = "sampled";

pub fn region_file_name(object: usize, label: &str) -> String {
    format!("object{object}_{label}.region")
}

/// Where `regions` gets its masks.
#[derive(Debug, Clone)]
pub enum MaskSource {
    /// Render synthetic masks of each object's planted oracle regions.
    Oracle,
    /// `<dir>/object<i>/*.pgm` with `.view` sidecars.
    Dir(PathBuf),
}

/// Proposes one region per (object, prompt) and writes
/// `object<i>_<label>.region` files into `out`. Returns the written paths.
pub fn regions(
    scene: &LoadedScene,
    source: &MaskSource,
    config: &PipelineConfig,
    seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    let rc = &config.region;
    let mut written = Vec::new();
    for (i, object) in scene.description.objects.iter().enumerate() {
        let mesh = &scene.world[i];
        let (center, radius) = mesh.bounding_sphere();
        let distance = rc.distance_factor * radius;
        let intrinsics = Intrinsics::framing(rc.image_size, rc.image_size, radius, distance);
        let object_seed = rng::stream_seed(seed, &[REGION_STREAM, i as u64]);
        let from_dir = match source {
            MaskSource::Oracle => None,
            MaskSource::Dir(dir) => Some(read_mask_dir(&dir.join(format!("object{i}")))?),
        };
        for (k, label) in object.prompts.iter().enumerate() {
            let region = match &from_dir {
                None => {
                    let views = sample_viewpoints(
                        rc.views,
                        rc.surface,
                        distance,
                        center,
                        intrinsics,
                        object_seed,
                    )?;
                    let planted = scene.oracle_faces(i, label)?;
                    let masks = synthetic_oracle_masks(
                        mesh,
                        &planted,
                        &views,
                        rc.oracle_noise,
                        rng::stream_seed(object_seed, &[k as u64]),
                        label,
                    )?;
                    propose_region(mesh, &views, &masks, rc.fraction)?
                }
                Some(files) => {
                    // Renumber this label's views densely.
                    let mut views = Vec::new();
                    let mut masks = Vec::new();
                    for f in files.iter().filter(|f| &f.observation.label == label) {
                        let mut obs = f.observation.clone();
                        obs.view_index = views.len();
                        views.push(f.view);
                        masks.push(obs);
                    }
                    if masks.is_empty() {
                        return Err(Error::empty(format!(
                            "object {i}: no masks for prompt {label:?}"
                        )));
                    }
                    propose_region(mesh, &views, &masks, rc.fraction)?
                }
            };
            log::info!("object {i} {label}: {} faces", region.face_indices.len());
            let path = out.join(region_file_name(i, label));
            std::fs::write(&path, region_to_string(&region)).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn load_region(
    scene: &LoadedScene,
    dir: &Path,
    object: usize,
    label: &str,
) -> Result<UsefulRegion> {
    let path = dir.join(region_file_name(object, label));
    let (file_label, faces) = read_region(&path)?;
    if file_label != label {
        return Err(Error::parse(
            &path,
            2,
            format!("label {file_label:?}, expected {label:?}"),
        ));
    }
    UsefulRegion::from_faces(label, &scene.world[object], &faces)
}

/// Optimizes `count` grasps per (object, prompt) seeded on the regions in
/// `regions_dir`. Records come out grouped by object, then prompt, then
/// index.
pub fn synth(
    scene: &LoadedScene,
    regions_dir: &Path,
    hand: &HandModel,
    config: &PipelineConfig,
    seed: u64,
    count: usize,
) -> Result<Vec<GraspRecord>> {
    let hash = config.hash();
    let mut records = Vec::new();
    if count == 0 {
        return Ok(records);
    }
    for (i, object) in scene.description.objects.iter().enumerate() {
        for (k, label) in object.prompts.iter().enumerate() {
            let region = load_region(scene, regions_dir, i, label)?;
            let ctx = scene.context(i, region)?;
            let opt = OptimizerConfig {
                seed: rng::stream_seed(seed, &[SYNTH_STREAM, i as u64, k as u64]),
                ..config.optimizer.clone()
            };
            let inits = init_grasps(&ctx, hand, count, &opt)?;
            let results = optimize_batch(&ctx, hand, &inits, &config.energy, &opt)?;
            log::info!("object {i} {label}: optimized {} grasps", results.len());
            for (n, r) in results.into_iter().enumerate() {
                let mut rec = GraspRecord {
                    scene_id: scene.id().to_string(),
                    object_id: i,
                    label: label.clone(),
                    index: n,
                    translation: [0.0; 3],
                    rotation: [1.0, 0.0, 0.0, 0.0],
                    joints: Vec::new(),
                    energy: r.energy,
                    lift: None,
                    shake: None,
                    smooth_label: None,
                    failure_reason: None,
                    bps: None,
                    provenance: Provenance {
                        master_seed: seed,
                        seed: rng::stream_seed(opt.seed, &[n as u64]),
                        config_hash: hash.clone(),
                        d: None,
                        task: None,
                    },
                };
                rec.set_grasp(&r.grasp);
                records.push(rec);
            }
        }
    }
    Ok(records)
}

fn check_records(scene: &LoadedScene, records: &[GraspRecord], hash: &str) -> Result<()> {
    check_hash(records, hash)?;
    for r in records {
        if r.scene_id != scene.id() {
            return Err(Error::invalid(format!(
                "record belongs to scene {:?}, not {:?}",
                r.scene_id,
                scene.id()
            )));
        }
        scene.object(r.object_id)?;
        if r.joints.len() != HAND_DOF {
            return Err(Error::invalid(format!(
                "record has {} joints",
                r.joints.len()
            )));
        }
    }
    Ok(())
}

/// Fills lift, shake, smooth label and failure reason. Record `r` is
/// judged with seed `rng::stream_seed(r.provenance.seed, &[2])`.
pub fn evaluate(
    scene: &LoadedScene,
    hand: &HandModel,
    config: &PipelineConfig,
    records: &[GraspRecord],
    task: Task,
) -> Result<Vec<GraspRecord>> {
    check_records(scene, records, &config.hash())?;
    let mut contexts = BTreeMap::new();
    for r in records {
        if let std::collections::btree_map::Entry::Vacant(e) = contexts.entry(r.object_id) {
            e.insert(scene.whole_context(r.object_id)?);
        }
    }
    Ok(par::map(records, |_, r| {
        let ec = EvalConfig {
            task,
            seed: rng::stream_seed(r.provenance.seed, &[EVAL_STREAM]),
            ..config.eval.clone()
        };
        let result = eval::evaluate(&contexts[&r.object_id], hand, &r.grasp(), &ec);
        let mut out = r.clone();
        out.lift = Some(result.lift);
        out.shake = Some(result.shake);
        out.smooth_label = Some(result.smooth_label);
        out.failure_reason = result.failure_reason;
        out.provenance.d = Some(ec.d);
        out.provenance.task = Some(task.name().to_string());
        out
    }))
}

/// Surface cloud of an object in the world frame. Object `i` is sampled
/// from `rng::stream(config.bps.seed, &[i])`.
pub fn object_cloud(
    scene: &LoadedScene,
    config: &PipelineConfig,
    object: usize,
) -> Result<Vec<Point3<f64>>> {
    scene.object(object)?;
    let mut r = rng::stream(config.bps.seed, &[object as u64]);
    Ok(scene.world[object].sample_surface(config.bps.cloud_points, &mut r))
}

pub fn basis(config: &PipelineConfig) -> Result<BasisPointSet> {
    generate_basis(config.bps.points, config.bps.radius, config.bps.seed)
}

fn object_encodings(
    scene: &LoadedScene,
    config: &PipelineConfig,
    basis: &BasisPointSet,
    objects: impl Iterator<Item = usize>,
) -> Result<BTreeMap<usize, BpsEncoding>> {
    let mut out = BTreeMap::new();
    for i in objects {
        if let std::collections::btree_map::Entry::Vacant(e) = out.entry(i) {
            e.insert(encode(basis, &object_cloud(scene, config, i)?)?);
        }
    }
    Ok(out)
}

/// Attaches the BPS encoding of each record's object.
pub fn attach_bps(
    scene: &LoadedScene,
    config: &PipelineConfig,
    records: &[GraspRecord],
) -> Result<Vec<GraspRecord>> {
    check_records(scene, records, &config.hash())?;
    let basis = basis(config)?;
    let encodings = object_encodings(scene, config, &basis, records.iter().map(|r| r.object_id))?;
    Ok(records
        .iter()
        .map(|r| {
            let mut out = r.clone();
            out.bps = Some(encodings[&r.object_id].distances.clone());
            out
        })
        .collect())
}

fn check_hash(records: &[GraspRecord], hash: &str) -> Result<()> {
    match records.iter().find(|r| r.provenance.config_hash != hash) {
        Some(r) => Err(Error::invalid(format!(
            "record {}/{}/{} was made with config {}, but this run's config hashes to {hash}",
            r.object_id, r.label, r.index, r.provenance.config_hash
        ))),
        None => Ok(()),
    }
}

/// Evaluated records whose smooth label reaches `threshold`.
pub fn dataset(
    config: &PipelineConfig,
    records: &[GraspRecord],
    threshold: f64,
) -> Result<Vec<GraspRecord>> {
    check_hash(records, &config.hash())?;
    if let Some(r) = records.iter().find(|r| r.smooth_label.is_none()) {
        return Err(Error::invalid(format!(
            "record {}/{}/{} has not been evaluated",
            r.object_id, r.label, r.index
        )));
    }
    eval::filter_dataset(records, threshold)
}

/// Trains the sampler on records that carry BPS encodings, with
/// `config.train` except for the seed.
pub fn train(
    config: &PipelineConfig,
    records: &[GraspRecord],
    seed: u64,
) -> Result<distill::TrainOutput> {
    check_hash(records, &config.hash())?;
    let basis = basis(config)?;
    let mut examples = Vec::with_capacity(records.len());
    for r in records {
        let bps = r.bps.as_ref().ok_or_else(|| {
            Error::invalid(format!(
                "record {}/{}/{} has no BPS encoding",
                r.object_id, r.label, r.index
            ))
        })?;
        examples.push(distill::TrainingExample {
            grasp: grasp_to_vector(&r.grasp()),
            condition: BpsEncoding {
                distances: bps.clone(),
            },
        });
    }
    if examples.is_empty() {
        return Err(Error::empty("no training records"));
    }
    let schedule = distill::NoiseSchedule::linear(&config.schedule)?;
    let tc = distill::TrainConfig {
        seed,
        ..config.train.clone()
    };
    distill::train(&examples, &basis, &schedule, &tc)
}

pub fn loss_csv(trace: &[f64]) -> String {
    let mut s = String::from("epoch,probe_loss\n");
    for (i, l) in trace.iter().enumerate() {
        let _ = writeln!(s, "{},{l}", i + 1);
    }
    s
}

/// Draws `n` grasps for the scene's target object. Sample `i` uses seed
/// `rng::stream_seed(seed, &[i])`; its energy is scored against the whole
/// target.
pub fn sample(
    scene: &LoadedScene,
    hand: &HandModel,
    config: &PipelineConfig,
    model: &Denoiser,
    seed: u64,
    n: usize,
) -> Result<Vec<GraspRecord>> {
    if model.grasp_dim() != 9 + HAND_DOF {
        return Err(Error::invalid(format!(
            "model emits {} values per grasp",
            model.grasp_dim()
        )));
    }
    let target = scene.description.target_object;
    let encodings = object_encodings(scene, config, &model.basis, std::iter::once(target))?;
    let condition = &encodings[&target];
    let vectors = distill::sample_batch(model, condition, n, seed)?;
    let ctx = scene.whole_context(target)?;
    let hash = config.hash();
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let grasp = vector_to_grasp(v)?;
            let mut rec = GraspRecord {
                scene_id: scene.id().to_string(),
                object_id: target,
                label: SAMPLED_LABEL.to_string(),
                index: i,
                translation: [0.0; 3],
                rotation: [1.0, 0.0, 0.0, 0.0],
                joints: Vec::new(),
                energy: energy(&ctx, hand, &grasp, &config.energy, &config.optimizer),
                lift: None,
                shake: None,
                smooth_label: None,
                failure_reason: None,
                bps: Some(condition.distances.clone()),
                provenance: Provenance {
                    master_seed: seed,
                    seed: rng::stream_seed(seed, &[i as u64]),
                    config_hash: hash.clone(),
                    d: None,
                    task: None,
                },
            };
            rec.set_grasp(&grasp);
            Ok(rec)
        })
        .collect()
}

/// Hand collision spheres drawn as icospheres, in the world frame.
pub fn hand_mesh(
    hand: &HandModel,
    record: &GraspRecord,
    subdivisions: usize,
) -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let state = forward_kinematics(hand, &record.grasp());
    let unit = icosphere(subdivisions, 1.0);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (s, c) in hand.spheres().iter().zip(&state.sphere_centers) {
        let base = vertices.len();
        vertices.extend(unit.vertices().iter().map(|v| c + v.coords * s.radius));
        faces.extend(
            unit.faces()
                .iter()
                .map(|f| [f[0] + base, f[1] + base, f[2] + base]),
        );
    }
    (vertices, faces)
}

pub fn export_file_name(record: &GraspRecord) -> String {
    format!(
        "{}_object{}_{}_{:05}.obj",
        record.scene_id, record.object_id, record.label, record.index
    )
}

/// One OBJ per record: the hand's spheres at the grasp followed by every
/// scene mesh.
pub fn export(
    scene: &LoadedScene,
    hand: &HandModel,
    config: &PipelineConfig,
    records: &[GraspRecord],
    out: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    for r in records {
        if r.scene_id != scene.id() {
            return Err(Error::invalid(format!(
                "record belongs to scene {:?}",
                r.scene_id
            )));
        }
    }
    let texts = par::map(records, |_, r| {
        let (hv, hf) = hand_mesh(hand, r, config.export.sphere_subdivisions);
        let mut parts: Vec<(&[Point3<f64>], &[[usize; 3]])> = vec![(&hv, &hf)];
        parts.extend(
            scene
                .world
                .iter()
                .map(|m: &TriangleMesh| (m.vertices(), m.faces())),
        );
        obj_string(&parts)
    });
    let mut written = Vec::new();
    for (r, text) in records.iter().zip(texts) {
        let path = out.join(export_file_name(r));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn obj_string(parts: &[(&[Point3<f64>], &[[usize; 3]])]) -> String {
    let mut s = String::from("# semgrasp-mesh v1\n");
    for (verts, _) in parts {
        for v in verts.iter() {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
    }
    let mut base = 1;
    for (verts, faces) in parts {
        for f in faces.iter() {
            let _ = writeln!(s, "f {} {} {}", f[0] + base, f[1] + base, f[2] + base);
        }
        base += verts.len();
    }
    s
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
