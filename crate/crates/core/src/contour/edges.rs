use serde::{Deserialize, Serialize};

use super::raster::Raster;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    ForwardDiff,
    Sobel,
}

/// Binary edge mask with the gradient field it was thresholded from.
#[derive(Clone, Debug)]
pub struct EdgeMap {
    pub magnitude: Raster,
    pub threshold: f64,
    pub mask: Vec<bool>,
}

impl EdgeMap {
    pub fn width(&self) -> usize {
        self.magnitude.width
    }

    pub fn height(&self) -> usize {
        self.magnitude.height
    }

    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.magnitude.width + x]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Edge pixel coordinates in row-major order.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let w = self.magnitude.width;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| [(i % w) as f64, (i / w) as f64])
            .collect()
    }
}

/// Gradient magnitude under `kernel` with replicated borders.
pub fn gradient_field(img: &Raster, kernel: Kernel) -> Raster {
    let g = |x: isize, y: isize| img.get_clamped(x, y);
    Raster::from_fn(img.width, img.height, |x, y| {
        let (x, y) = (x as isize, y as isize);
        let (gx, gy) = match kernel {
            Kernel::ForwardDiff => (g(x + 1, y) - g(x, y), g(x, y + 1) - g(x, y)),
            Kernel::Sobel => {
                let gx = (g(x + 1, y - 1) + 2.0 * g(x + 1, y) + g(x + 1, y + 1))
                    - (g(x - 1, y - 1) + 2.0 * g(x - 1, y) + g(x - 1, y + 1));
                let gy = (g(x - 1, y + 1) + 2.0 * g(x, y + 1) + g(x + 1, y + 1))
                    - (g(x - 1, y - 1) + 2.0 * g(x, y - 1) + g(x + 1, y - 1));
                (gx, gy)
            }
        };
        gx.hypot(gy)
    })
}

/// Edges are pixels whose gradient magnitude exceeds `threshold`
/// (default: half the maximum).
pub fn gradient_magnitude(img: &Raster, kernel: Kernel, threshold: Option<f64>) -> EdgeMap {
    let magnitude = gradient_field(img, kernel);
    let max = magnitude.data.iter().cloned().fold(0.0, f64::max);
    let threshold = threshold.unwrap_or(0.5 * max);
    let mask = magnitude.data.iter().map(|&v| v > threshold).collect();
    EdgeMap {
        magnitude,
        threshold,
        mask,
    }
}

/// Clears edges at radius `<= r_hub` or `>= r_rim` (pixels, from the image centre).
pub fn remove_rim_hub_edges(edges: &mut EdgeMap, r_hub: f64, r_rim: f64) {
    let (w, h) = (edges.width(), edges.height());
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    for y in 0..h {
        for x in 0..w {
            let r = (x as f64 + 0.5 - cx).hypot(y as f64 + 0.5 - cy);
            if r <= r_hub || r >= r_rim {
                edges.mask[y * w + x] = false;
            }
        }
    }
}

/// Zhang-Suen thinning of the edge mask to one-pixel-wide, 8-connected curves.
pub fn thin_edges(edges: &mut EdgeMap) {
    let (w, h) = (edges.width() as isize, edges.height() as isize);
    let m = &mut edges.mask;
    let at = |m: &Vec<bool>, x: isize, y: isize| x >= 0 && y >= 0 && x < w && y < h && m[(y * w + x) as usize];
    let mut changed = true;
    let mut clear = Vec::new();
    while changed {
        changed = false;
        for pass in 0..2 {
            clear.clear();
            for y in 0..h {
                for x in 0..w {
                    if !at(m, x, y) {
                        continue;
                    }
                    // P2..P9 clockwise from north.
                    let p = [
                        at(m, x, y - 1),
                        at(m, x + 1, y - 1),
                        at(m, x + 1, y),
                        at(m, x + 1, y + 1),
                        at(m, x, y + 1),
                        at(m, x - 1, y + 1),
                        at(m, x - 1, y),
                        at(m, x - 1, y - 1),
                    ];
                    let b = p.iter().filter(|&&v| v).count();
                    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
                    let (c1, c2) = if pass == 0 {
                        (p[0] && p[2] && p[4], p[2] && p[4] && p[6])
                    } else {
                        (p[0] && p[2] && p[6], p[0] && p[4] && p[6])
                    };
                    if (2..=6).contains(&b) && a == 1 && !c1 && !c2 {
                        clear.push((y * w + x) as usize);
                    }
                }
            }
            for &i in &clear {
                m[i] = false;
            }
            changed |= !clear.is_empty();
        }
    }
}
