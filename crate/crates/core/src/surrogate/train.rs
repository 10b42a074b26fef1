use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{LabeledItem, LabeledSet, Split, Target};
use super::model::{EnsembleModel, MinMaxScaler, RegressorModel};
use crate::autoenc::{AutoencoderModel, AutoencoderSpec};
use crate::designspace::DesignImage;
use crate::error::{Error, Result};
use crate::nn::{mse, Adam, AdamConfig, Mode, Tensor};

/// Regressor training settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub lr: f64,
    /// Per-epoch decay: epoch `e` uses `lr / (1 + decay * e)`.
    pub decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best validation loss before stopping.
    pub patience: usize,
    pub seed: u64,
    pub freeze_backbone: bool,
    pub head_max_width: usize,
    pub n_frequency: usize,
    pub n_mass: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            lr: 0.002,
            decay: 0.001,
            batch_size: 256,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            freeze_backbone: false,
            head_max_width: 512,
            n_frequency: 9,
            n_mass: 5,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(self.decay >= 0.0) {
            return Err(Error::validation("need lr > 0 and decay >= 0"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::validation("batch_size, max_epochs and patience must be >= 1"));
        }
        if self.n_frequency == 0 || self.n_mass == 0 {
            return Err(Error::validation("ensemble member counts must be >= 1"));
        }
        Ok(())
    }

    fn member_seed(&self, target: Target, k: usize) -> u64 {
        let offset = match target {
            Target::Frequency => 0,
            Target::Mass => 0x9e37_79b9,
        };
        self.seed.wrapping_add(offset).wrapping_add(7919 * k as u64)
    }
}

/// Per-epoch history of one regressor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegressorReport {
    pub target: Option<Target>,
    pub seed: u64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Validation RMSE in target units.
    pub val_rmse: Vec<f64>,
    pub lr: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub n_train: usize,
    pub n_val: usize,
}

impl RegressorReport {
    pub fn best_val_rmse(&self) -> f64 {
        self.val_rmse.get(self.best_epoch).copied().unwrap_or(f64::NAN)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "lr", "train_mse", "val_mse", "val_rmse"])?;
        for e in 0..self.train_loss.len() {
            w.write_record([
                e.to_string(),
                self.lr[e].to_string(),
                self.train_loss[e].to_string(),
                self.val_loss[e].to_string(),
                self.val_rmse[e].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Fits the scaler of `target` on the training split.
pub fn fit_scaler(set: &LabeledSet, target: Target) -> Result<MinMaxScaler> {
    MinMaxScaler::fit(&set.labels(target, Split::Train))
}

/// Trains `model` on the train split with early stopping on the val split (the
/// train split stands in when val is empty) and returns the best checkpoint.
pub fn train_regressor(
    mut model: RegressorModel,
    set: &LabeledSet,
    scaler: MinMaxScaler,
    cfg: &SurrogateConfig,
    seed: u64,
) -> Result<(RegressorModel, RegressorReport)> {
    cfg.validate()?;
    let target = model.target;
    let train = set.split(Split::Train);
    if train.is_empty() {
        return Err(Error::validation("training split is empty"));
    }
    let mut val = set.split(Split::Val);
    if val.is_empty() {
        val = train.clone();
    }
    model.scaler = Some(scaler);
    let val_images: Vec<&DesignImage> = val.iter().map(|i| &i.image).collect();
    let val_y: Vec<f64> = val.iter().map(|i| scaler.scale(i.label(target))).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut opt = if cfg.freeze_backbone {
        Adam::new(AdamConfig::default(), &[&model.head])
    } else {
        Adam::new(AdamConfig::default(), &[&model.backbone, &model.head])
    };
    let mut report = RegressorReport {
        target: Some(target),
        seed,
        n_train: train.len(),
        n_val: val.len(),
        ..RegressorReport::default()
    };
    let mut best = (f64::INFINITY, model.clone());
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.max_epochs {
        let lr = cfg.lr / (1.0 + cfg.decay * epoch as f64);
        opt.set_lr(lr);
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let items: Vec<&LabeledItem> = batch.iter().map(|&i| train[i]).collect();
            let loss = step(&mut model, &mut opt, &items, &scaler, cfg.freeze_backbone, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::Numeric {
                    message: format!("regressor loss became non-finite in epoch {epoch}; lower the learning rate"),
                    residual: loss,
                });
            }
            sum += loss * batch.len() as f64;
        }
        let val_loss = scaled_mse(&model, &val_images, &val_y)?;
        report.lr.push(lr);
        report.train_loss.push(sum / train.len() as f64);
        report.val_loss.push(val_loss);
        report.val_rmse.push(val_loss.sqrt() * scaler.range());
        if val_loss < best.0 {
            best = (val_loss, model.clone());
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    Ok((best.1, report))
}

fn step(
    model: &mut RegressorModel,
    opt: &mut Adam,
    items: &[&LabeledItem],
    scaler: &MinMaxScaler,
    frozen: bool,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let imgs: Vec<&DesignImage> = items.iter().map(|i| &i.image).collect();
    let x = model.images_to_tensor(&imgs)?;
    let y = Tensor::new(
        vec![items.len(), 1],
        items.iter().map(|i| scaler.scale(i.label(model.target))).collect(),
    )?;
    let tb = model.backbone.forward(&x, &mut Mode::Train(rng))?;
    let th = model.head.forward(tb.output(), &mut Mode::Train(rng))?;
    let (loss, dy) = mse(th.output(), &y)?;
    let bh = model.head.backward(&th, dy, !frozen, None)?;
    if frozen {
        opt.step(&mut [&mut model.head], &[&bh.grads]);
    } else {
        let dz = bh.input.expect("input gradient requested");
        let bb = model.backbone.backward(&tb, dz, false, None)?;
        opt.step(&mut [&mut model.backbone, &mut model.head], &[&bb.grads, &bh.grads]);
    }
    Ok(loss)
}

fn scaled_mse(model: &RegressorModel, images: &[&DesignImage], y: &[f64]) -> Result<f64> {
    let p = model.forward_scaled(images)?;
    Ok(p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

/// CNN regressor whose backbone is a freshly initialized encoder.
pub fn train_baseline(
    set: &LabeledSet,
    spec: &AutoencoderSpec,
    target: Target,
    cfg: &SurrogateConfig,
) -> Result<(RegressorModel, RegressorReport)> {
    let model = RegressorModel::baseline(target, spec, cfg.head_max_width, cfg.seed)?;
    train_regressor(model, set, fit_scaler(set, target)?, cfg, cfg.seed)
}

/// Regressor fine-tuned from a pretrained encoder.
pub fn train_transfer(
    encoder: &AutoencoderModel,
    set: &LabeledSet,
    target: Target,
    cfg: &SurrogateConfig,
) -> Result<(RegressorModel, RegressorReport)> {
    let size = set
        .image_size()
        .ok_or_else(|| Error::validation("labeled set is empty"))?;
    let model = RegressorModel::transfer(target, encoder, size, cfg.head_max_width, cfg.seed)?;
    train_regressor(model, set, fit_scaler(set, target)?, cfg, cfg.seed)
}

/// Training histories of all ensemble members.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub frequency: Vec<RegressorReport>,
    pub mass: Vec<RegressorReport>,
}

/// Transfer-learned members differing by initialization seed and data order;
/// member 0 of each target uses `cfg.seed`.
pub fn train_ensemble(
    encoder: &AutoencoderModel,
    set: &LabeledSet,
    cfg: &SurrogateConfig,
) -> Result<(EnsembleModel, EnsembleReport)> {
    cfg.validate()?;
    let size = set
        .image_size()
        .ok_or_else(|| Error::validation("labeled set is empty"))?;
    let fscale = fit_scaler(set, Target::Frequency)?;
    let mscale = fit_scaler(set, Target::Mass)?;
    let jobs: Vec<(Target, usize, MinMaxScaler)> = (0..cfg.n_frequency)
        .map(|k| (Target::Frequency, k, fscale))
        .chain((0..cfg.n_mass).map(|k| (Target::Mass, k, mscale)))
        .collect();
    let trained: Vec<(RegressorModel, RegressorReport)> = jobs
        .par_iter()
        .map(|&(target, k, scaler)| {
            let seed = cfg.member_seed(target, k);
            let model = RegressorModel::transfer(target, encoder, size, cfg.head_max_width, seed)?;
            train_regressor(model, set, scaler, cfg, seed)
        })
        .collect::<Result<_>>()?;
    let mut report = EnsembleReport::default();
    let (mut fm, mut mm) = (Vec::new(), Vec::new());
    for (model, r) in trained {
        match model.target {
            Target::Frequency => {
                fm.push(model);
                report.frequency.push(r);
            }
            Target::Mass => {
                mm.push(model);
                report.mass.push(r);
            }
        }
    }
    Ok((EnsembleModel::new(fm, mm)?, report))
}
