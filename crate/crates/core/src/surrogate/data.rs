use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::designspace::{flip_horizontal, rotate, DesignImage};
use crate::error::{Error, Result};

/// Rotation angles of the labeled augmentation.
pub const AUGMENT_ANGLES: [f64; 5] = [0.0, 72.0, 144.0, 216.0, 288.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Frequency,
    Mass,
}

impl Target {
    pub fn unit(self) -> &'static str {
        match self {
            Target::Frequency => "Hz",
            Target::Mass => "kg",
        }
    }
}

/// One design with its simulated labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledItem {
    pub image: DesignImage,
    /// Id of the design this item was derived from; equals the image id for
    /// unaugmented items.
    pub source_id: String,
    pub frequency_hz: f64,
    pub mass_kg: f64,
    pub split: Split,
}

impl LabeledItem {
    pub fn new(image: DesignImage, frequency_hz: f64, mass_kg: f64) -> Self {
        Self {
            source_id: image.id().to_string(),
            image,
            frequency_hz,
            mass_kg,
            split: Split::Train,
        }
    }

    pub fn label(&self, target: Target) -> f64 {
        match target {
            Target::Frequency => self.frequency_hz,
            Target::Mass => self.mass_kg,
        }
    }
}

/// Labeled designs of one resolution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledSet {
    items: Vec<LabeledItem>,
}

impl LabeledSet {
    pub fn new(items: Vec<LabeledItem>) -> Result<Self> {
        for it in &items {
            for (name, v) in [("frequency", it.frequency_hz), ("mass", it.mass_kg)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::validation(format!(
                        "{name} label of `{}` must be finite and positive, got {v}",
                        it.image.id()
                    )));
                }
            }
        }
        if let Some(first) = items.first() {
            if let Some(bad) = items.iter().find(|i| i.image.size() != first.image.size()) {
                return Err(Error::dimension(first.image.size(), bad.image.size()));
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[LabeledItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn image_size(&self) -> Option<usize> {
        self.items.first().map(|i| i.image.size())
    }

    pub fn split(&self, split: Split) -> Vec<&LabeledItem> {
        self.items.iter().filter(|i| i.split == split).collect()
    }

    pub fn labels(&self, target: Target, split: Split) -> Vec<f64> {
        self.split(split).iter().map(|i| i.label(target)).collect()
    }

    /// Tags items train/val/test by shuffled source id so that all variants of
    /// one design share a split.
    pub fn assign_splits(&mut self, val_fraction: f64, test_fraction: f64, seed: u64) -> Result<()> {
        if !(val_fraction >= 0.0 && test_fraction >= 0.0 && val_fraction + test_fraction < 1.0) {
            return Err(Error::validation(format!(
                "split fractions {val_fraction} + {test_fraction} must be non-negative and sum below 1"
            )));
        }
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, it) in self.items.iter().enumerate() {
            groups.entry(it.source_id.clone()).or_default().push(i);
        }
        let mut keys: Vec<String> = groups.keys().cloned().collect();
        keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n = keys.len() as f64;
        let mut n_test = (test_fraction * n).round() as usize;
        let mut n_val = (val_fraction * n).round() as usize;
        // the label scaler needs two training sources
        let max_held = keys.len().saturating_sub(2);
        while n_test + n_val > max_held && n_val > 0 {
            n_val -= 1;
        }
        n_test = n_test.min(max_held);
        for (k, key) in keys.iter().enumerate() {
            let split = if k < n_test {
                Split::Test
            } else if k < n_test + n_val {
                Split::Val
            } else {
                Split::Train
            };
            for &i in &groups[key] {
                self.items[i].split = split;
            }
        }
        Ok(())
    }
}

/// Expands every train and val item into 5 rotations by 72° times
/// {identity, horizontal flip}; test items are kept as single copies.
pub fn augment_labeled(set: &LabeledSet) -> LabeledSet {
    let mut out = Vec::with_capacity(set.len() * 10);
    for it in set.items() {
        if it.split == Split::Test {
            out.push(it.clone());
            continue;
        }
        for (r, &angle) in AUGMENT_ANGLES.iter().enumerate() {
            let rotated = rotate(&it.image, angle);
            for flip in [false, true] {
                let img = if flip { flip_horizontal(&rotated) } else { rotated.clone() };
                let id = format!("{}_r{r}{}", it.image.id(), if flip { "f" } else { "" });
                out.push(LabeledItem {
                    image: img.with_id(id),
                    ..it.clone()
                });
            }
        }
    }
    LabeledSet { items: out }
}
