//! Frequency and mass regression from design images: labeled augmentation,
//! CNN and transfer-learned regressors, ensembles, metrics and stiffness ranking.

mod data;
mod metrics;
mod model;
mod train;

pub use data::{augment_labeled, LabeledItem, LabeledSet, Split, Target, AUGMENT_ANGLES};
pub use metrics::{
    evaluate, evaluate_model, metrics, rank_by_stiffness, rotation_spread, stiffness, Candidate,
    EvaluationReport, ItemError, Metrics, RankedCandidate,
};
pub use model::{
    head_widths, EnsembleModel, MinMaxScaler, Prediction, RegressorModel, ENSEMBLE_KIND, HEAD_DEPTH,
    REGRESSOR_KIND,
};
pub use train::{
    fit_scaler, train_baseline, train_ensemble, train_regressor, train_transfer, EnsembleReport,
    RegressorReport, SurrogateConfig,
};

#[cfg(test)]
mod tests;
