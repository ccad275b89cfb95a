//! Grasp records: one JSON object per line.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::FailureReason;
use crate::hand::GraspPose;
use crate::optimize::EnergyBreakdown;

pub const RECORD_HEADER: &str = "# semgrasp-records v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    /// Seed of this record's own stream.
    pub seed: u64,
    pub config_hash: String,
    /// Perturbation count used for the smooth label, once evaluated.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub task: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspRecord {
    pub scene_id: String,
    pub object_id: usize,
    pub label: String,
    pub index: usize,
    pub translation: [f64; 3],
    /// Unit quaternion `[w, x, y, z]`.
    pub rotation: [f64; 4],
    pub joints: Vec<f64>,
    pub energy: EnergyBreakdown,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lift: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shake: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub smooth_label: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure_reason: Option<FailureReason>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bps: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl GraspRecord {
    pub fn grasp(&self) -> GraspPose {
        let [w, x, y, z] = self.rotation;
        GraspPose::new(
            Vector3::from(self.translation),
            UnitQuaternion::new_normalize(Quaternion::new(w, x, y, z)),
            self.joints.clone(),
        )
    }

    pub fn set_grasp(&mut self, grasp: &GraspPose) {
        self.translation = grasp.translation.into();
        let q = grasp.rotation.quaternion();
        self.rotation = [q.w, q.i, q.j, q.k];
        self.joints = grasp.joints.clone();
    }
}

pub fn write_records(path: &Path, records: &[GraspRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{RECORD_HEADER}").map_err(io)?;
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| Error::invalid(format!("cannot encode record: {e}")))?;
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_records(path: &Path) -> Result<Vec<GraspRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 {
            if line.trim() != RECORD_HEADER {
                return Err(Error::parse(
                    path,
                    1,
                    format!("expected header {RECORD_HEADER:?}"),
                ));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let r: GraspRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if let Some(l) = r.smooth_label {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("smooth label {l} outside [0, 1]"),
                ));
            }
        }
        records.push(r);
    }
    Ok(records)
}
