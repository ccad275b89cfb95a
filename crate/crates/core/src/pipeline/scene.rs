//! Scene files (TOML):
//!
//! ```toml
//! version = 1
//! id = "mug-on-table"
//! seed = 7
//! target_object = 0
//! table = 0.0
//!
//! [[objects]]
//! mesh = "mug.obj"            # relative to the scene file
//! position = [0.0, 0.0, 0.05]
//! rotation = [0.0, 0.0, 0.0]  # axis-angle, radians
//! scale = 1.0
//! prompts = ["handle", "body"]
//!
//! # Planted regions for the oracle labeler: faces whose centroid (in the
//! # mesh's own frame, before scale) lies in the box.
//! [objects.oracle.handle]
//! min = [0.03, -0.01, -1.0]
//! max = [1.0, 0.01, 1.0]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::config::toml_error;
use crate::error::{Error, Result};
use crate::geometry::{load_mesh, TriangleMesh};
use crate::optimize::{Obstacle, SceneContext};
use crate::region::UsefulRegion;

pub const SCENE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl OracleBox {
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub mesh: PathBuf,
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default)]
    pub rotation: [f64; 3],
    #[serde(default = "unit_scale")]
    pub scale: f64,
    pub prompts: Vec<String>,
    #[serde(default)]
    pub oracle: BTreeMap<String, OracleBox>,
}

fn unit_scale() -> f64 {
    1.0
}

impl SceneObject {
    pub fn pose(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::from(Vector3::from(self.position)),
            UnitQuaternion::from_scaled_axis(Vector3::from(self.rotation)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub version: u32,
    pub id: String,
    pub seed: u64,
    pub target_object: usize,
    #[serde(default)]
    pub table: Option<f64>,
    pub objects: Vec<SceneObject>,
}

impl SceneDescription {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let scene: SceneDescription =
            toml::from_str(text).map_err(|e| toml_error(path, text, e))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENE_VERSION {
            return Err(Error::invalid(format!(
                "scene version {} is not supported (expected {SCENE_VERSION})",
                self.version
            )));
        }
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            return Err(Error::invalid(format!("bad scene id {:?}", self.id)));
        }
        if self.target_object >= self.objects.len() {
            return Err(Error::invalid(format!(
                "target_object {} but the scene has {} objects",
                self.target_object,
                self.objects.len()
            )));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.scale > 0.0 && o.scale.is_finite()) {
                return Err(Error::invalid(format!(
                    "object {i}: scale must be positive"
                )));
            }
            if o.position.iter().chain(&o.rotation).any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("object {i}: non-finite pose")));
            }
            for p in &o.prompts {
                if p.is_empty()
                    || !p
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                {
                    return Err(Error::invalid(format!(
                        "object {i}: prompt {p:?} must be non-empty letters, digits, '_' or '-'"
                    )));
                }
            }
            if let Some(label) = o.oracle.keys().find(|l| !o.prompts.contains(l)) {
                return Err(Error::invalid(format!(
                    "object {i}: oracle region {label:?} is not a prompt"
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }
}

/// A parsed scene with every mesh placed in the world frame.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub description: SceneDescription,
    /// Meshes in their own frame, scaled.
    pub local: Vec<TriangleMesh>,
    pub world: Vec<TriangleMesh>,
}

impl LoadedScene {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let description = SceneDescription::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let meshes = description
            .objects
            .iter()
            .map(|o| load_mesh(base.join(&o.mesh)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_meshes(description, meshes)
    }

    pub fn from_meshes(description: SceneDescription, meshes: Vec<TriangleMesh>) -> Result<Self> {
        description.validate()?;
        if meshes.len() != description.objects.len() {
            return Err(Error::invalid("one mesh per scene object is required"));
        }
        let mut local = Vec::new();
        let mut world = Vec::new();
        for (o, m) in description.objects.iter().zip(meshes) {
            local.push(m.transformed(&Isometry3::identity(), o.scale)?);
            world.push(m.transformed(&o.pose(), o.scale)?);
        }
        Ok(LoadedScene {
            description,
            local,
            world,
        })
    }

    pub fn id(&self) -> &str {
        &self.description.id
    }

    pub fn object(&self, i: usize) -> Result<&SceneObject> {
        self.description
            .objects
            .get(i)
            .ok_or_else(|| Error::invalid(format!("object {i} is not in scene {}", self.id())))
    }

    /// Faces of the planted oracle region for `(object, label)`.
    pub fn oracle_faces(&self, object: usize, label: &str) -> Result<Vec<usize>> {
        let o = self.object(object)?;
        let bx = o.oracle.get(label).ok_or_else(|| {
            Error::invalid(format!(
                "object {object} has no oracle region for prompt {label:?}"
            ))
        })?;
        // Boxes are given before scaling.
        let mesh = &self.local[object];
        Ok((0..mesh.face_count())
            .filter(|&f| bx.contains(&Point3::from(mesh.face_centroid(f).coords / o.scale)))
            .collect())
    }

    /// Grasping context for one object: the rest of the scene are obstacles.
    pub fn context(&self, object: usize, region: UsefulRegion) -> Result<SceneContext> {
        self.object(object)?;
        let mut ctx = SceneContext::new(self.world[object].clone(), region)?
            .with_table(self.description.table);
        for (i, m) in self.world.iter().enumerate() {
            if i != object {
                ctx = ctx.with_obstacle(Obstacle::new(
                    &format!("object{i}"),
                    m,
                    &Isometry3::identity(),
                )?);
            }
        }
        Ok(ctx)
    }

    pub fn whole_context(&self, object: usize) -> Result<SceneContext> {
        let mesh = &self.world[self.object(object).map(|_| object)?];
        let faces: Vec<usize> = (0..mesh.face_count()).collect();
        self.context(object, UsefulRegion::from_faces("all", mesh, &faces)?)
    }
}
