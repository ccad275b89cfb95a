//! File-to-file stages of the dataset pipeline.
//!
//! Each stage reads and writes only documented files, so any stage can be
//! rerun from its inputs. Randomness is keyed by the master seed and the
//! work item, never by scheduling, so worker count does not change a byte
//! of output.

mod config;
mod scene;
mod stages;

pub use config::{
    BpsConfig, DatasetConfig, ExportConfig, PipelineConfig, RegionConfig, SynthConfig,
    CONFIG_VERSION,
};
pub use scene::{LoadedScene, OracleBox, SceneDescription, SceneObject, SCENE_VERSION};
pub use stages::{
    attach_bps, basis, dataset, evaluate, export, export_file_name, hand_mesh, loss_csv,
    object_cloud, region_file_name, regions, sample, synth, train, MaskSource, SAMPLED_LABEL,
};
