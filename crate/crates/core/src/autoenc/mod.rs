//! Convolutional autoencoder: architecture, training and latent-space diagnostics.

mod model;
mod train;

pub use model::{AutoencoderModel, AutoencoderSpec, LatentVector, CHECKPOINT_KIND};
pub use train::{
    grad_check, interpolate, reconstruction_report, split_by_source, train, train_from, train_with_validation,
    ReconstructionReport,
    TrainConfig, TrainReport,
};
