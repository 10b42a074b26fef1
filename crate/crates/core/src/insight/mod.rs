//! Interpretation of trained surrogates and latent spaces: regression Grad-CAM,
//! k-means clustering, frequency grouping, 2D embeddings and overlays.

mod cluster;
mod embed;
mod gradcam;

pub use cluster::{elbow_curve, elbow_k, frequency_groups, kmeans, lloyd, ClusterAssignment, FrequencyGroups};
pub use embed::{
    conditional_affinities, pca_2d, read_embedding_csv, tsne, write_embedding_csv, EmbedMethod, Embedding2D,
    EmbeddingRow, Pca, TsneConfig, TSNE_MAX_POINTS,
};
pub use gradcam::{grad_cam, grad_cam_ensemble, grad_cam_sequential, overlay, GradCam, Heatmap};
