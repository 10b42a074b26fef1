use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{AutoencoderModel, AutoencoderSpec, LatentVector};
use crate::designspace::{DesignImage, DesignSet};
use crate::error::{Error, Result};
use crate::nn::{mse, Adam, AdamConfig, GradCheckReport, Mode, Tensor};

/// Optimizer and schedule for autoencoder training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of source designs held out for validation; 0 validates on the
    /// training set.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 8e-5,
            batch_size: 64,
            epochs: 100,
            seed: 0,
            val_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::validation("need lr > 0, batch_size >= 1, epochs >= 1"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::validation("val_fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Per-epoch losses of a training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (0-based) whose weights were kept.
    pub best_epoch: usize,
    pub n_train: usize,
    pub n_val: usize,
}

impl TrainReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "train_mse", "val_mse"])?;
        for (e, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            w.write_record([e.to_string(), t.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Splits item indices into train and validation groups so that all variants of
/// one source design land on the same side.
pub fn split_by_source(set: &DesignSet, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for i in 0..set.len() {
        groups.entry(set.source_id(i)).or_default().push(i);
    }
    let mut keys: Vec<&str> = groups.keys().copied().collect();
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (val_fraction * keys.len() as f64).round() as usize;
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (k, key) in keys.iter().enumerate() {
        let target = if k < n_val { &mut val } else { &mut train };
        target.extend_from_slice(&groups[key]);
    }
    train.sort_unstable();
    val.sort_unstable();
    if val_fraction > 0.0 && (train.is_empty() || val.is_empty()) {
        return Err(Error::validation(format!(
            "split of {} source designs at {val_fraction} leaves an empty subset",
            keys.len()
        )));
    }
    Ok((train, val))
}

/// Trains a fresh model on `set`.
pub fn train(set: &DesignSet, spec: &AutoencoderSpec, cfg: &TrainConfig) -> Result<(AutoencoderModel, TrainReport)> {
    let model = AutoencoderModel::new(spec.clone(), cfg.seed)?;
    train_from(model, set, cfg)
}

/// Continues training `model`; returns the weights with the lowest validation MSE.
pub fn train_from(
    model: AutoencoderModel,
    set: &DesignSet,
    cfg: &TrainConfig,
) -> Result<(AutoencoderModel, TrainReport)> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    let (train_idx, mut val_idx) = split_by_source(set, cfg.val_fraction, cfg.seed)?;
    if cfg.val_fraction == 0.0 {
        val_idx = train_idx.clone();
    }
    let items = set.items();
    let train_images: Vec<&DesignImage> = train_idx.iter().map(|&i| &items[i]).collect();
    let val_images: Vec<&DesignImage> = val_idx.iter().map(|&i| &items[i]).collect();
    fit(model, &train_images, &val_images, cfg)
}

/// Trains on `train` and tracks the validation MSE on a separate `val` set.
pub fn train_with_validation(
    model: AutoencoderModel,
    train: &DesignSet,
    val: &DesignSet,
    cfg: &TrainConfig,
) -> Result<(AutoencoderModel, TrainReport)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::validation("training and validation sets must be non-empty"));
    }
    let train_images: Vec<&DesignImage> = train.items().iter().collect();
    let val_images: Vec<&DesignImage> = val.items().iter().collect();
    fit(model, &train_images, &val_images, cfg)
}

fn fit(
    mut model: AutoencoderModel,
    train_images: &[&DesignImage],
    val_images: &[&DesignImage],
    cfg: &TrainConfig,
) -> Result<(AutoencoderModel, TrainReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut opt = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        &[&model.encoder, &model.decoder],
    );
    let mut report = TrainReport {
        n_train: train_images.len(),
        n_val: val_images.len(),
        ..TrainReport::default()
    };
    let mut best = (f64::INFINITY, model.clone());
    let mut order: Vec<usize> = (0..train_images.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut count) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let imgs: Vec<&DesignImage> = batch.iter().map(|&i| train_images[i]).collect();
            let x = model.images_to_tensor(&imgs)?;
            let loss = step(&mut model, &mut opt, &x, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::Numeric {
                    message: format!("training loss became non-finite in epoch {epoch}; lower the learning rate"),
                    residual: loss,
                });
            }
            sum += loss * batch.len() as f64;
            count += batch.len();
        }
        report.train_loss.push(sum / count as f64);
        let val = mean_mse(&model, val_images)?;
        report.val_loss.push(val);
        if val < best.0 {
            best = (val, model.clone());
            report.best_epoch = epoch;
        }
    }
    Ok((best.1, report))
}

fn step(model: &mut AutoencoderModel, opt: &mut Adam, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<f64> {
    let enc = model.encoder.forward(x, &mut Mode::Train(rng))?;
    let dec = model.decoder.forward(enc.output(), &mut Mode::Train(rng))?;
    let (loss, dy) = mse(dec.output(), x)?;
    let bd = model.decoder.backward(&dec, dy, true, None)?;
    let dz = bd.input.expect("input gradient requested");
    let be = model.encoder.backward(&enc, dz, false, None)?;
    opt.step(
        &mut [&mut model.encoder, &mut model.decoder],
        &[&be.grads, &bd.grads],
    );
    Ok(loss)
}

fn mean_mse(model: &AutoencoderModel, images: &[&DesignImage]) -> Result<f64> {
    if images.is_empty() {
        return Ok(f64::NAN);
    }
    let net = model.as_sequential();
    let mut total = 0.0;
    for chunk in images.chunks(32) {
        let x = model.images_to_tensor(chunk)?;
        total += mse(&net.predict(&x)?, &x)?.0 * chunk.len() as f64;
    }
    Ok(total / images.len() as f64)
}

/// Per-item reconstruction MSE and their mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub items: Vec<(String, f64)>,
    pub mean: f64,
}

pub fn reconstruction_report(model: &AutoencoderModel, set: &DesignSet) -> Result<ReconstructionReport> {
    let net = model.as_sequential();
    let mut items = Vec::with_capacity(set.len());
    for img in set.items() {
        let x = model.images_to_tensor(&[img])?;
        items.push((img.id().to_string(), mse(&net.predict(&x)?, &x)?.0));
    }
    let mean = if items.is_empty() {
        0.0
    } else {
        items.iter().map(|(_, v)| v).sum::<f64>() / items.len() as f64
    };
    Ok(ReconstructionReport { items, mean })
}

/// Decodes `k` equally spaced points from `z1` to `z2`, endpoints included.
pub fn interpolate(model: &AutoencoderModel, z1: &LatentVector, z2: &LatentVector, k: usize) -> Result<Vec<DesignImage>> {
    if k < 2 {
        return Err(Error::validation(format!("interpolation needs k >= 2, got {k}")));
    }
    if z1.z.len() != z2.z.len() {
        return Err(Error::dimension(z1.z.len(), z2.z.len()));
    }
    (0..k)
        .map(|i| {
            let t = i as f64 / (k - 1) as f64;
            let z = LatentVector {
                z: z1.z.iter().zip(&z2.z).map(|(a, b)| (1.0 - t) * a + t * b).collect(),
            };
            model.decode(&z, format!("interp_{i}"))
        })
        .collect()
}

/// Finite-difference check of the reconstruction-loss gradient on one image.
pub fn grad_check(model: &AutoencoderModel, image: &DesignImage, h: f64) -> Result<GradCheckReport> {
    let x = model.images_to_tensor(&[image])?;
    crate::nn::grad_check(&model.as_sequential(), &x, &x, h)
}
