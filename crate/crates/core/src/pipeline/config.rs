use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distill::{ScheduleConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::optimize::{EnergyWeights, OptimizerConfig};
use crate::region::CameraSurface;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    pub views: usize,
    pub surface: CameraSurface,
    pub image_size: usize,
    /// Camera distance as a multiple of the object's bounding radius.
    pub distance_factor: f64,
    pub fraction: f64,
    /// Corruption probability of oracle masks.
    pub oracle_noise: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig {
            views: 20,
            surface: CameraSurface::Sphere,
            image_size: 128,
            distance_factor: 3.0,
            fraction: crate::region::DEFAULT_FRACTION,
            oracle_noise: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Grasps per (object, prompt).
    pub count: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { count: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub threshold: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpsConfig {
    pub points: usize,
    pub radius: f64,
    pub seed: u64,
    /// Surface samples per object cloud.
    pub cloud_points: usize,
}

impl Default for BpsConfig {
    fn default() -> Self {
        BpsConfig {
            points: 256,
            radius: 0.15,
            seed: 1,
            cloud_points: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    /// Subdivisions of the icosphere drawn for each collision sphere.
    pub sphere_subdivisions: usize,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig {
            sphere_subdivisions: 1,
        }
    }
}

/// Every tunable of the pipeline, one TOML table per module. Missing keys
/// take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub region: RegionConfig,
    pub synth: SynthConfig,
    pub optimizer: OptimizerConfig,
    pub energy: EnergyWeights,
    pub eval: EvalConfig,
    pub dataset: DatasetConfig,
    pub bps: BpsConfig,
    pub schedule: ScheduleConfig,
    pub train: TrainConfig,
    pub export: ExportConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            region: RegionConfig::default(),
            synth: SynthConfig::default(),
            optimizer: OptimizerConfig::default(),
            energy: EnergyWeights::default(),
            eval: EvalConfig::default(),
            dataset: DatasetConfig::default(),
            bps: BpsConfig::default(),
            schedule: ScheduleConfig::default(),
            train: TrainConfig::default(),
            export: ExportConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| toml_error(path, text, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let r = &self.region;
        if r.views == 0 || r.image_size == 0 {
            return Err(Error::invalid(
                "region views and image_size must be at least 1",
            ));
        }
        if !(r.distance_factor > 1.0 && r.distance_factor.is_finite()) {
            return Err(Error::invalid("region distance_factor must exceed 1"));
        }
        if !(r.fraction > 0.0 && r.fraction <= 1.0) {
            return Err(Error::invalid("region fraction must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&r.oracle_noise) {
            return Err(Error::invalid("oracle_noise must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.dataset.threshold) {
            return Err(Error::invalid("dataset threshold must be in [0, 1]"));
        }
        if self.bps.points == 0 || self.bps.cloud_points == 0 || !(self.bps.radius > 0.0) {
            return Err(Error::invalid(
                "bps needs points, cloud_points and a positive radius",
            ));
        }
        self.optimizer.validate()?;
        self.energy.validate()?;
        self.eval.validate()?;
        self.train.validate()?;
        crate::distill::NoiseSchedule::linear(&self.schedule)?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub(crate) fn toml_error(path: &Path, text: &str, e: toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::parse(path, line, e.message().to_string())
}
