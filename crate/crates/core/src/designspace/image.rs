use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a design came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Reference,
    Topopt,
    Decoded,
    Test,
}

/// Square grayscale design image with values in `[0, 1]`, stored row-major.
///
/// The side length is a power of two no smaller than 32.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignImage {
    id: String,
    provenance: Provenance,
    size: usize,
    pixels: Vec<f64>,
}

pub(crate) fn check_resolution(size: usize) -> Result<()> {
    if size < 32 || !size.is_power_of_two() {
        return Err(Error::validation(format!(
            "design resolution must be a power of two >= 32, got {size}"
        )));
    }
    Ok(())
}

impl DesignImage {
    pub fn new(
        id: impl Into<String>,
        provenance: Provenance,
        size: usize,
        pixels: Vec<f64>,
    ) -> Result<Self> {
        check_resolution(size)?;
        if pixels.len() != size * size {
            return Err(Error::dimension(size * size, pixels.len()));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::validation(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Self {
            id: id.into(),
            provenance,
            size,
            pixels,
        })
    }

    /// Builds an image from a per-pixel function of `(x, y)`; values are clamped.
    pub fn from_fn(
        id: impl Into<String>,
        provenance: Provenance,
        size: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_resolution(size)?;
        let mut pixels = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                pixels.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Ok(Self {
            id: id.into(),
            provenance,
            size,
            pixels,
        })
    }

    pub fn zeros(id: impl Into<String>, provenance: Provenance, size: usize) -> Result<Self> {
        Self::from_fn(id, provenance, size, |_, _| 0.0)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.size + x]
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Replaces the pixel buffer, clamping into `[0, 1]`.
    pub(crate) fn map_pixels(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            id: self.id.clone(),
            provenance: self.provenance,
            size: self.size,
            pixels: self.pixels.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect(),
        }
    }

    pub(crate) fn with_pixels_unchecked(&self, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), self.size * self.size);
        Self {
            id: self.id.clone(),
            provenance: self.provenance,
            size: self.size,
            pixels,
        }
    }

    /// Thresholds every pixel to 0 or 1 (`v >= threshold` becomes 1).
    pub fn binarized(&self, threshold: f64) -> Self {
        self.map_pixels(|v| if v >= threshold { 1.0 } else { 0.0 })
    }

    /// Mean pixel value.
    pub fn material_fraction(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }
}
