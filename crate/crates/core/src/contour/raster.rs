use serde::{Deserialize, Serialize};

use crate::designspace::DesignImage;
use crate::error::{Error, Result};

/// Rectangular grid of reals, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dimension(width * height, data.len()));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn from_image(img: &DesignImage) -> Self {
        Self {
            width: img.size(),
            height: img.size(),
            data: img.pixels().to_vec(),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Value with zero outside the grid.
    pub fn get_or_zero(&self, x: isize, y: isize) -> f64 {
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            0.0
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    /// Value with edge replication outside the grid.
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn count_above(&self, t: f64) -> usize {
        self.data.iter().filter(|&&v| v >= t).count()
    }
}

/// Inclusive pixel bounding box `(x0, y0, x1, y1)`.
pub type BBox = (usize, usize, usize, usize);

/// Bounding box of the boundary pixels of the foreground (`>= 0.5`): foreground
/// pixels with a 4-neighbour in the background or outside the image.
pub fn content_bbox(img: &Raster) -> Option<BBox> {
    let mut bb: Option<BBox> = None;
    for y in 0..img.height {
        for x in 0..img.width {
            if img.get(x, y) < 0.5 {
                continue;
            }
            let (xi, yi) = (x as isize, y as isize);
            let boundary = [(-1, 0), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|(dx, dy)| img.get_or_zero(xi + dx, yi + dy) < 0.5);
            if boundary {
                bb = Some(match bb {
                    None => (x, y, x, y),
                    Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                });
            }
        }
    }
    bb
}

/// Crops to [`content_bbox`] without padding.
pub fn crop_tight(img: &Raster) -> Result<Raster> {
    let (x0, y0, x1, y1) = content_bbox(img).ok_or_else(|| Error::validation("image has no content to crop"))?;
    Ok(Raster::from_fn(x1 - x0 + 1, y1 - y0 + 1, |x, y| img.get(x0 + x, y0 + y)))
}

/// Crops to the content bounding box and pads the short side symmetrically
/// (extra pixel at the end) with zeros to make the result square.
pub fn crop_to_content(img: &Raster) -> Result<Raster> {
    let tight = crop_tight(img)?;
    let s = tight.width.max(tight.height);
    let ox = (s - tight.width) / 2;
    let oy = (s - tight.height) / 2;
    Ok(Raster::from_fn(s, s, |x, y| {
        if x >= ox && y >= oy && x - ox < tight.width && y - oy < tight.height {
            tight.get(x - ox, y - oy)
        } else {
            0.0
        }
    }))
}
