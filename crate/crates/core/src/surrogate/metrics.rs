use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::data::{LabeledSet, Split, AUGMENT_ANGLES};
use super::model::{EnsembleModel, Prediction, RegressorModel};
use crate::designspace::{rotate, DesignImage};
use crate::error::{Error, Result};

/// Root mean square error (target units) and mean absolute percent error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mape: f64,
}

pub fn metrics(predicted: &[f64], actual: &[f64]) -> Result<Metrics> {
    if predicted.len() != actual.len() {
        return Err(Error::dimension(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(Error::validation("no items to evaluate"));
    }
    if actual.iter().any(|&y| y == 0.0) {
        return Err(Error::validation("MAPE is undefined for a zero label"));
    }
    let n = actual.len() as f64;
    let (mut se, mut ape) = (0.0, 0.0);
    for (p, y) in predicted.iter().zip(actual) {
        se += (p - y).powi(2);
        ape += ((y - p) / y).abs();
    }
    Ok(Metrics {
        rmse: (se / n).sqrt(),
        mape: 100.0 * ape / n,
    })
}

/// Metrics of one regressor on a split.
pub fn evaluate_model(model: &RegressorModel, set: &LabeledSet, split: Split) -> Result<Metrics> {
    let items = set.split(split);
    let imgs: Vec<&DesignImage> = items.iter().map(|i| &i.image).collect();
    let y: Vec<f64> = items.iter().map(|i| i.label(model.target)).collect();
    metrics(&model.predict_batch(&imgs)?, &y)
}

/// Prediction error of one item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemError {
    pub id: String,
    pub frequency_hz: f64,
    pub frequency_pred: f64,
    pub mass_kg: f64,
    pub mass_pred: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub split: Split,
    pub frequency: Metrics,
    pub mass: Metrics,
    pub items: Vec<ItemError>,
}

impl EvaluationReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for it in &self.items {
            w.serialize(it)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub fn evaluate(ensemble: &EnsembleModel, set: &LabeledSet, split: Split) -> Result<EvaluationReport> {
    let items = set.split(split);
    let imgs: Vec<&DesignImage> = items.iter().map(|i| &i.image).collect();
    let preds = ensemble.predict_batch(&imgs)?;
    let fy: Vec<f64> = items.iter().map(|i| i.frequency_hz).collect();
    let my: Vec<f64> = items.iter().map(|i| i.mass_kg).collect();
    let fp: Vec<f64> = preds.iter().map(|p| p.frequency_hz).collect();
    let mp: Vec<f64> = preds.iter().map(|p| p.mass_kg).collect();
    Ok(EvaluationReport {
        split,
        frequency: metrics(&fp, &fy)?,
        mass: metrics(&mp, &my)?,
        items: items
            .iter()
            .zip(&preds)
            .map(|(it, p)| ItemError {
                id: it.image.id().to_string(),
                frequency_hz: it.frequency_hz,
                frequency_pred: p.frequency_hz,
                mass_kg: it.mass_kg,
                mass_pred: p.mass_kg,
            })
            .collect(),
    })
}

/// Mean absolute deviation of predictions over the five augmentation rotations
/// of `image` from their mean.
pub fn rotation_spread(model: &RegressorModel, image: &DesignImage) -> Result<f64> {
    let rotated: Vec<DesignImage> = AUGMENT_ANGLES.iter().map(|&a| rotate(image, a)).collect();
    let refs: Vec<&DesignImage> = rotated.iter().collect();
    let p = model.predict_batch(&refs)?;
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    Ok(p.iter().map(|v| (v - mean).abs()).sum::<f64>() / p.len() as f64)
}

/// A design with predicted frequency and mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    #[serde(flatten)]
    pub prediction: Prediction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub rank: usize,
    pub id: String,
    pub frequency_hz: f64,
    pub mass_kg: f64,
    /// `(2πf)² m` in N/m.
    pub stiffness: f64,
}

pub fn stiffness(frequency_hz: f64, mass_kg: f64) -> f64 {
    (2.0 * std::f64::consts::PI * frequency_hz).powi(2) * mass_kg
}

/// Sorts candidates by descending stiffness, ties by ascending id.
pub fn rank_by_stiffness(candidates: &[Candidate]) -> Vec<RankedCandidate> {
    let mut out: Vec<RankedCandidate> = candidates
        .iter()
        .map(|c| RankedCandidate {
            rank: 0,
            id: c.id.clone(),
            frequency_hz: c.prediction.frequency_hz,
            mass_kg: c.prediction.mass_kg,
            stiffness: stiffness(c.prediction.frequency_hz, c.prediction.mass_kg),
        })
        .collect();
    out.sort_by(|a, b| {
        b.stiffness
            .partial_cmp(&a.stiffness)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    for (i, c) in out.iter_mut().enumerate() {
        c.rank = i + 1;
    }
    out
}
