use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::Target;
use crate::autoenc::{AutoencoderModel, AutoencoderSpec};
use crate::designspace::DesignImage;
use crate::error::{Error, Result};
use crate::nn::{load_checkpoint, save_checkpoint, Layer, Sequential, Tensor};

pub const REGRESSOR_KIND: &str = "regressor";
pub const ENSEMBLE_KIND: &str = "ensemble";

/// Number of fully connected layers in the regression head.
pub const HEAD_DEPTH: usize = 7;

/// Min-max normalization of one target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub y_min: f64,
    pub y_max: f64,
}

impl MinMaxScaler {
    pub fn fit(labels: &[f64]) -> Result<Self> {
        let y_min = labels.iter().copied().fold(f64::INFINITY, f64::min);
        let y_max = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(y_min.is_finite() && y_max.is_finite() && y_max > y_min) {
            return Err(Error::validation(format!(
                "scaler needs at least two distinct finite labels, got range [{y_min}, {y_max}]"
            )));
        }
        Ok(Self { y_min, y_max })
    }

    pub fn scale(&self, y: f64) -> f64 {
        (y - self.y_min) / (self.y_max - self.y_min)
    }

    pub fn unscale(&self, s: f64) -> f64 {
        s * (self.y_max - self.y_min) + self.y_min
    }

    pub fn range(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Hidden widths of the head: halving from the power of two at or above the
/// flattened backbone size (clamped to `[16, max_width]`), floored at 8.
pub fn head_widths(flat: usize, max_width: usize) -> Vec<usize> {
    let mut w = flat.next_power_of_two().clamp(16, max_width.max(16));
    let mut out = Vec::with_capacity(HEAD_DEPTH);
    for _ in 0..HEAD_DEPTH - 1 {
        out.push(w);
        w = (w / 2).max(8);
    }
    out.push(1);
    out
}

/// Convolutional backbone with a fully connected head predicting one scaled target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    pub target: Target,
    pub input_size: usize,
    pub backbone: Sequential,
    pub head: Sequential,
    /// `None` until the model has been trained.
    pub scaler: Option<MinMaxScaler>,
}

impl RegressorModel {
    /// Builds a regressor on `backbone`, which must map `[1, s, s]` images to a flat vector.
    pub fn new(target: Target, input_size: usize, backbone: Sequential, max_width: usize, seed: u64) -> Result<Self> {
        let out = backbone.output_shape(&[1, 1, input_size, input_size])?;
        if out.len() != 2 {
            return Err(Error::dimension("flat backbone output", format!("{out:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4ead);
        let mut prev = out[1];
        let mut layers = Vec::new();
        for (i, w) in head_widths(prev, max_width).into_iter().enumerate() {
            layers.push(Layer::dense(prev, w, &mut rng));
            if i + 1 < HEAD_DEPTH {
                layers.push(Layer::Relu);
            }
            prev = w;
        }
        Ok(Self {
            target,
            input_size,
            backbone,
            head: Sequential::new(layers),
            scaler: None,
        })
    }

    /// Randomly initialized backbone with the encoder architecture of `spec`.
    pub fn baseline(target: Target, spec: &AutoencoderSpec, max_width: usize, seed: u64) -> Result<Self> {
        let enc = AutoencoderModel::new(spec.clone(), seed)?.encoder;
        Self::new(target, spec.input_size, enc, max_width, seed)
    }

    /// Backbone copied from a pretrained encoder.
    pub fn transfer(target: Target, encoder: &AutoencoderModel, input_size: usize, max_width: usize, seed: u64) -> Result<Self> {
        if encoder.input_size() != input_size {
            return Err(Error::validation(format!(
                "encoder expects {0}x{0} images but the data set has {1}x{1}",
                encoder.input_size(),
                input_size
            )));
        }
        Self::new(target, input_size, encoder.encoder.clone(), max_width, seed)
    }

    pub fn is_trained(&self) -> bool {
        self.scaler.is_some()
    }

    pub fn head_depth(&self) -> usize {
        self.head.layers.iter().filter(|l| matches!(l, Layer::Dense { .. })).count()
    }

    /// Backbone and head as one network producing the scaled target.
    pub fn as_sequential(&self) -> Sequential {
        let mut layers = self.backbone.layers.clone();
        layers.extend(self.head.layers.iter().cloned());
        Sequential::new(layers)
    }

    /// Index (in [`Self::as_sequential`]) of the activation following the last convolution.
    pub fn last_conv_activation(&self) -> Result<usize> {
        let conv = self
            .backbone
            .layers
            .iter()
            .rposition(|l| matches!(l, Layer::Conv2d { .. }))
            .ok_or_else(|| Error::Structural("regressor backbone has no convolution".into()))?;
        Ok(match self.backbone.layers.get(conv + 1) {
            Some(Layer::Relu) => conv + 1,
            _ => conv,
        })
    }

    pub fn images_to_tensor(&self, images: &[&DesignImage]) -> Result<Tensor> {
        let s = self.input_size;
        if let Some(bad) = images.iter().find(|i| i.size() != s) {
            return Err(Error::dimension(format!("{s}x{s} image"), format!("{0}x{0}", bad.size())));
        }
        Tensor::stack(images.iter().map(|i| i.pixels()), &[1, s, s])
    }

    /// Scaled network outputs.
    pub(crate) fn forward_scaled(&self, images: &[&DesignImage]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(64) {
            let x = self.images_to_tensor(chunk)?;
            let z = self.backbone.predict(&x)?;
            out.extend_from_slice(self.head.predict(&z)?.data());
        }
        Ok(out)
    }

    /// Predictions in target units.
    pub fn predict_batch(&self, images: &[&DesignImage]) -> Result<Vec<f64>> {
        let scaler = self
            .scaler
            .ok_or_else(|| Error::State("regressor has not been trained".into()))?;
        Ok(self.forward_scaled(images)?.into_iter().map(|s| scaler.unscale(s)).collect())
    }

    pub fn predict(&self, image: &DesignImage) -> Result<f64> {
        Ok(self.predict_batch(&[image])?[0])
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        save_checkpoint(path, REGRESSOR_KIND, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_checkpoint(path, REGRESSOR_KIND)
    }
}

/// Predicted frequency and mass of one design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub frequency_hz: f64,
    pub mass_kg: f64,
}

/// Mean of several regressors per target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub frequency_members: Vec<RegressorModel>,
    pub mass_members: Vec<RegressorModel>,
}

impl EnsembleModel {
    pub fn new(frequency_members: Vec<RegressorModel>, mass_members: Vec<RegressorModel>) -> Result<Self> {
        if frequency_members.is_empty() || mass_members.is_empty() {
            return Err(Error::validation("an ensemble needs at least one member per target"));
        }
        for (members, target) in [(&frequency_members, Target::Frequency), (&mass_members, Target::Mass)] {
            if members.iter().any(|m| m.target != target) {
                return Err(Error::validation(format!("ensemble member predicts the wrong target for {target:?}")));
            }
            if members.iter().any(|m| m.scaler != members[0].scaler) {
                return Err(Error::validation("ensemble members must share one scaler per target"));
            }
        }
        Ok(Self {
            frequency_members,
            mass_members,
        })
    }

    pub fn input_size(&self) -> usize {
        self.frequency_members[0].input_size
    }

    pub fn members(&self, target: Target) -> &[RegressorModel] {
        match target {
            Target::Frequency => &self.frequency_members,
            Target::Mass => &self.mass_members,
        }
    }

    /// Arithmetic mean of the members' unscaled predictions.
    pub fn predict_target(&self, target: Target, images: &[&DesignImage]) -> Result<Vec<f64>> {
        let members = self.members(target);
        let mut acc = vec![0.0; images.len()];
        for m in members {
            for (a, p) in acc.iter_mut().zip(m.predict_batch(images)?) {
                *a += p;
            }
        }
        let n = members.len() as f64;
        Ok(acc.into_iter().map(|a| a / n).collect())
    }

    pub fn predict_batch(&self, images: &[&DesignImage]) -> Result<Vec<Prediction>> {
        let f = self.predict_target(Target::Frequency, images)?;
        let m = self.predict_target(Target::Mass, images)?;
        Ok(f.into_iter()
            .zip(m)
            .map(|(frequency_hz, mass_kg)| Prediction { frequency_hz, mass_kg })
            .collect())
    }

    pub fn predict(&self, image: &DesignImage) -> Result<Prediction> {
        Ok(self.predict_batch(&[image])?[0])
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        save_checkpoint(path, ENSEMBLE_KIND, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let e: Self = load_checkpoint(path, ENSEMBLE_KIND)?;
        Self::new(e.frequency_members, e.mass_members)
    }
}
