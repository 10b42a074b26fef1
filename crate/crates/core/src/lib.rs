//! Generative wheel design pipeline.
//!
//! Stages, in order: topology-optimized 2D designs ([`topopt`]) seeded by
//! synthetic references ([`designspace`]), a convolutional autoencoder
//! ([`autoenc`]) whose latent space drives the design of experiments
//! ([`doe`]), image-to-contour processing ([`contour`]), voxel solid
//! construction ([`solid`]), free-free modal FEM ([`modal`]), transfer-learned
//! surrogates ([`surrogate`]) and explanation tools ([`insight`]). The
//! [`studio`] module orchestrates the stages and serves results over HTTP.

pub mod autoenc;
pub mod contour;
pub mod designspace;
pub mod doe;
pub mod error;
pub mod insight;
pub mod linalg;
pub mod modal;
pub mod nn;
pub mod solid;
pub mod studio;
pub mod surrogate;
pub mod topopt;
pub mod util;

pub use error::{Error, Result};
