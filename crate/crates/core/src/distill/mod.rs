//! Basis point encodings and a small denoising-diffusion grasp sampler.

mod bps;
pub mod checkpoint;
mod model;
pub mod net;
mod schedule;
mod vector;

pub use bps::{encode, generate_basis, BasisPointSet, BpsEncoding};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use model::{
    ancestral_sample, sample, sample_batch, time_embedding, train, Denoiser, TrainConfig,
    TrainOutput, TrainingExample,
};
pub use net::{Adam, Mlp};
pub use schedule::{forward_noise, NoiseSchedule, ScheduleConfig};
pub use vector::{grasp_to_vector, vector_to_grasp, WRIST_LEN};
