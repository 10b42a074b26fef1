use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use super::image::DesignImage;
use super::transform::{l1_pixels, rotate};
use crate::error::{Error, Result};

/// Free-form per-item metadata (generation parameters, labels, provenance links).
pub type ItemMeta = Map<String, Value>;

/// An ordered collection of designs with unique ids and one manifest entry each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DesignSet {
    items: Vec<DesignImage>,
    meta: Vec<ItemMeta>,
    index: BTreeMap<String, usize>,
}

impl DesignSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_items(items: impl IntoIterator<Item = DesignImage>) -> Result<Self> {
        let mut set = Self::new();
        for item in items {
            set.push(item, ItemMeta::new())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, item: DesignImage, meta: ItemMeta) -> Result<()> {
        if self.index.contains_key(item.id()) {
            return Err(Error::validation(format!("duplicate design id `{}`", item.id())));
        }
        if let Some(first) = self.items.first() {
            if first.size() != item.size() {
                return Err(Error::dimension(first.size(), item.size()));
            }
        }
        self.index.insert(item.id().to_string(), self.items.len());
        self.items.push(item);
        self.meta.push(meta);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[DesignImage] {
        &self.items
    }

    pub fn meta(&self, i: usize) -> &ItemMeta {
        &self.meta[i]
    }

    pub fn get(&self, id: &str) -> Option<(&DesignImage, &ItemMeta)> {
        self.index.get(id).map(|&i| (&self.items[i], &self.meta[i]))
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DesignImage, &ItemMeta)> {
        self.items.iter().zip(&self.meta)
    }

    /// Keeps the entries at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Self::new();
        for &i in indices {
            out.push(self.items[i].clone(), self.meta[i].clone())?;
        }
        Ok(out)
    }

    /// Source design id of an item: the `source` manifest key if present, else its own id.
    pub fn source_id(&self, i: usize) -> &str {
        self.meta[i]
            .get("source")
            .and_then(Value::as_str)
            .unwrap_or_else(|| self.items[i].id())
    }
}

/// Greedy near-duplicate removal in manifest order.
///
/// An item survives iff its L1 distance to every previously kept item is at
/// least `threshold`.
pub fn deduplicate(set: &DesignSet, threshold: f64) -> Result<DesignSet> {
    if !(threshold > 0.0) {
        return Err(Error::validation("dedup threshold must be positive"));
    }
    let mut kept: Vec<usize> = Vec::new();
    for (i, item) in set.items().iter().enumerate() {
        let distinct = kept
            .iter()
            .all(|&k| l1_pixels(set.items()[k].pixels(), item.pixels()) >= threshold);
        if distinct {
            kept.push(i);
        }
    }
    set.select(&kept)
}

/// Rotation-augments every design `copies` times with seeded uniform angles in [0, 360).
pub fn augment_rotations(set: &DesignSet, copies: usize, seed: u64) -> Result<DesignSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    augment_rotations_with(set, copies, |_, _| rng.random_range(0.0..360.0))
}

/// Rotation augmentation with caller-chosen angles `angle(source_index, copy)`.
pub fn augment_rotations_with(
    set: &DesignSet,
    copies: usize,
    mut angle: impl FnMut(usize, usize) -> f64,
) -> Result<DesignSet> {
    if copies == 0 {
        return Err(Error::validation("copies must be >= 1"));
    }
    let mut out = DesignSet::new();
    let mut seen = HashSet::new();
    for (i, (item, meta)) in set.iter().enumerate() {
        for c in 0..copies {
            let a = angle(i, c);
            let id = format!("{}_r{c}", item.id());
            debug_assert!(seen.insert(id.clone()));
            let mut m = meta.clone();
            m.insert("source".into(), json!(set.source_id(i)));
            m.insert("angle_deg".into(), json!(a));
            out.push(rotate(item, a).with_id(id), m)?;
        }
    }
    Ok(out)
}
