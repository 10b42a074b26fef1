use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::image::{DesignImage, Provenance};
use crate::error::{Error, Result};

/// Outer wheel radius as a fraction of the image half-width; leaves a small margin.
pub const OUTER_RADIUS_FRAC: f64 = 0.95;
/// Center bore radius as a fraction of the hub radius.
pub const BORE_FRAC: f64 = 0.35;
const SUPERSAMPLE: usize = 4;

/// Parameters of a synthetic reference wheel silhouette.
///
/// Radii are fractions of the outer wheel radius; `spoke_width` is the arc
/// width of a spoke as a fraction of the outer radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceParams {
    pub n_spokes: u32,
    pub spoke_width: f64,
    pub spiral_angle: f64,
    pub hub_radius_frac: f64,
    pub rim_inner_radius_frac: f64,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self {
            n_spokes: 5,
            spoke_width: 0.18,
            spiral_angle: 0.0,
            hub_radius_frac: 0.32,
            rim_inner_radius_frac: 0.8,
        }
    }
}

impl ReferenceParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_spokes < 1 {
            return Err(Error::validation("n_spokes must be >= 1"));
        }
        if !(self.spoke_width > 0.0 && self.spoke_width <= 0.5) {
            return Err(Error::validation("spoke_width must lie in (0, 0.5]"));
        }
        if !(self.hub_radius_frac > 0.0
            && self.hub_radius_frac < self.rim_inner_radius_frac
            && self.rim_inner_radius_frac < 1.0)
        {
            return Err(Error::validation(
                "need 0 < hub_radius_frac < rim_inner_radius_frac < 1",
            ));
        }
        if !self.spiral_angle.is_finite() {
            return Err(Error::validation("spiral_angle must be finite"));
        }
        Ok(())
    }

    /// Draws a varied but valid parameter set.
    pub fn sample(rng: &mut impl rand::Rng) -> Self {
        Self {
            n_spokes: rng.random_range(3..=8),
            spoke_width: rng.random_range(0.07..0.26),
            spiral_angle: rng.random_range(-45.0..45.0),
            hub_radius_frac: rng.random_range(0.30..0.36),
            rim_inner_radius_frac: rng.random_range(0.78..0.84),
        }
    }

    /// Material test in wheel-normalized polar coordinates (`r` in units of the
    /// outer radius, `theta` in radians).
    pub(crate) fn is_material(&self, r: f64, theta: f64) -> bool {
        let hub = self.hub_radius_frac;
        let rim = self.rim_inner_radius_frac;
        if r > 1.0 {
            return false;
        }
        if r >= rim {
            return true;
        }
        if r <= hub {
            return r >= BORE_FRAC * hub;
        }
        let n = self.n_spokes as f64;
        let sweep = self.spiral_angle.to_radians() * (r - hub) / (rim - hub);
        let half_w = 0.5 * self.spoke_width;
        (0..self.n_spokes).any(|k| {
            let center = 2.0 * PI * k as f64 / n + sweep;
            let d = (theta - center + PI).rem_euclid(2.0 * PI) - PI;
            r * d.abs() <= half_w
        })
    }
}

/// Rasterizes a binary reference wheel: rim annulus, hub disc with center
/// bore, and `n_spokes` spokes swept by `spiral_angle` from hub to rim.
pub fn synth_reference(
    params: &ReferenceParams,
    resolution: usize,
    id: impl Into<String>,
) -> Result<DesignImage> {
    params.validate()?;
    let half = resolution as f64 / 2.0;
    let outer = OUTER_RADIUS_FRAC * half;
    let step = 1.0 / SUPERSAMPLE as f64;
    DesignImage::from_fn(id, Provenance::Reference, resolution, |x, y| {
        let mut hits = 0usize;
        for sy in 0..SUPERSAMPLE {
            for sx in 0..SUPERSAMPLE {
                let px = x as f64 + (sx as f64 + 0.5) * step - half;
                let py = y as f64 + (sy as f64 + 0.5) * step - half;
                let r = (px * px + py * py).sqrt() / outer;
                // image rows grow downward; measure angles counterclockwise on screen
                if params.is_material(r, (-py).atan2(px)) {
                    hits += 1;
                }
            }
        }
        if 2 * hits >= SUPERSAMPLE * SUPERSAMPLE {
            1.0
        } else {
            0.0
        }
    })
}
