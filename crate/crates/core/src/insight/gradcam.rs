use image::{GrayImage, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::designspace::DesignImage;
use crate::error::{Error, Result};
use crate::nn::{Mode, Sequential, Tensor};
use crate::surrogate::{EnsembleModel, RegressorModel, Target};

/// Non-negative saliency grid, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Values divided by the maximum; an all-zero map stays zero.
    pub fn normalized(&self) -> Self {
        let m = self.max();
        let values = if m > 0.0 {
            self.values.iter().map(|v| v / m).collect()
        } else {
            self.values.clone()
        };
        Self { values, ..*self }
    }

    /// Bilinear resampling with pixel-center alignment and clamped borders.
    pub fn upsample(&self, width: usize, height: usize) -> Self {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut values = Vec::with_capacity(width * height);
        for j in 0..height {
            let fy = ((j as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - y0 as f64;
            for i in 0..width {
                let fx = ((i as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - x0 as f64;
                let top = self.get(x0, y0) * (1.0 - tx) + self.get(x1, y0) * tx;
                let bot = self.get(x0, y1) * (1.0 - tx) + self.get(x1, y1) * tx;
                values.push(top * (1.0 - ty) + bot * ty);
            }
        }
        Self { width, height, values }
    }

    /// 8-bit grayscale rendering of the max-normalized map.
    pub fn to_gray8(&self) -> GrayImage {
        let n = self.normalized();
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([(n.get(x as usize, y as usize) * 255.0).round() as u8])
        })
    }
}

/// Raw heatmap at feature-map resolution and its upsampled version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCam {
    pub raw: Heatmap,
    pub upsampled: Heatmap,
    /// Channel weights `a_k`.
    pub weights: Vec<f64>,
}

/// Grad-CAM of the scalar output of `net` at the `[N=1, C, H, W]` output of layer `tap`.
pub fn grad_cam_sequential(net: &Sequential, tap: usize, x: &Tensor) -> Result<GradCam> {
    if x.batch() != 1 {
        return Err(Error::validation("grad-cam takes a single image"));
    }
    let trace = net.forward(x, &mut Mode::Eval)?;
    if trace.output().len() != 1 {
        return Err(Error::dimension("scalar output", format!("{:?}", trace.output().shape())));
    }
    let a = &trace.acts[tap + 1];
    let (_, c, h, w) = a
        .dims4()
        .map_err(|_| Error::Structural(format!("layer {tap} output is not a feature map")))?;
    let dy = Tensor::new(trace.output().shape().to_vec(), vec![1.0])?;
    let grad = net
        .backward(&trace, dy, false, Some(tap))?
        .tap
        .expect("tap gradient requested");
    let cells = h * w;
    let weights: Vec<f64> = (0..c)
        .map(|k| grad.data()[k * cells..(k + 1) * cells].iter().sum::<f64>() / cells as f64)
        .collect();
    let mut values = vec![0.0; cells];
    for (k, ak) in weights.iter().enumerate() {
        for (v, f) in values.iter_mut().zip(&a.data()[k * cells..(k + 1) * cells]) {
            *v += ak * f;
        }
    }
    for v in &mut values {
        *v = v.max(0.0);
    }
    let raw = Heatmap {
        width: w,
        height: h,
        values,
    };
    let (_, _, ih, iw) = x.dims4()?;
    let upsampled = raw.upsample(iw, ih);
    Ok(GradCam { raw, upsampled, weights })
}

/// Grad-CAM at the last convolutional activation of a regressor.
pub fn grad_cam(model: &RegressorModel, image: &DesignImage) -> Result<GradCam> {
    let tap = model.last_conv_activation()?;
    let x = model.images_to_tensor(&[image])?;
    grad_cam_sequential(&model.as_sequential(), tap, &x)
}

/// Mean of the member heatmaps of one ensemble target.
pub fn grad_cam_ensemble(ensemble: &EnsembleModel, target: Target, image: &DesignImage) -> Result<GradCam> {
    let members = ensemble.members(target);
    let mut acc: Option<GradCam> = None;
    for m in members {
        let g = grad_cam(m, image)?;
        match acc.as_mut() {
            None => acc = Some(g),
            Some(a) => {
                for (x, y) in a.raw.values.iter_mut().zip(&g.raw.values) {
                    *x += y;
                }
                for (x, y) in a.upsampled.values.iter_mut().zip(&g.upsampled.values) {
                    *x += y;
                }
                for (x, y) in a.weights.iter_mut().zip(&g.weights) {
                    *x += y;
                }
            }
        }
    }
    let mut g = acc.ok_or_else(|| Error::validation("ensemble has no members"))?;
    let n = members.len() as f64;
    for v in g.raw.values.iter_mut().chain(&mut g.upsampled.values).chain(&mut g.weights) {
        *v /= n;
    }
    Ok(g)
}

fn hot(t: f64) -> [f64; 3] {
    [(3.0 * t).min(1.0), (3.0 * t - 1.0).clamp(0.0, 1.0), (3.0 * t - 2.0).clamp(0.0, 1.0)]
}

/// Blends the max-normalized heatmap (hot colormap) over the design image.
///
/// An all-zero heatmap returns the design unchanged; `alpha = 1` shows only the heatmap.
pub fn overlay(heatmap: &Heatmap, image: &DesignImage, alpha: f64) -> Result<RgbImage> {
    let n = image.size();
    let hm = if heatmap.width == n && heatmap.height == n {
        heatmap.clone()
    } else {
        heatmap.upsample(n, n)
    };
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::validation(format!("alpha must be in [0, 1], got {alpha}")));
    }
    let zero = hm.max() == 0.0;
    let hm = hm.normalized();
    Ok(RgbImage::from_fn(n as u32, n as u32, |x, y| {
        let g = image.get(x as usize, y as usize);
        let px = if zero {
            [g; 3]
        } else {
            let c = hot(hm.get(x as usize, y as usize));
            [0, 1, 2].map(|i| (1.0 - alpha) * g + alpha * c[i])
        };
        Rgb(px.map(|v| (v * 255.0).round() as u8))
    }))
}
