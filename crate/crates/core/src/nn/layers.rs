use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::gemm::gemm;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Forward-pass mode; dropout is only active in training.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// A network layer. Convolutions are 3×3, stride 1, zero "same" padding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        /// `[out, in, 3, 3]`
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    MaxPool2,
    Upsample2,
    Dropout {
        rate: f64,
    },
    Dense {
        in_features: usize,
        out_features: usize,
        /// `[out, in]`
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    Sigmoid,
    Flatten,
    Unflatten {
        channels: usize,
        height: usize,
        width: usize,
    },
}

/// Per-layer data kept from the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub enum Aux {
    None,
    Argmax(Vec<u32>),
    Mask(Vec<f64>),
}

/// Gradient of a parametric layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    /// He-normal initialized 3×3 convolution.
    pub fn conv(in_channels: usize, out_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = in_channels * 9;
        Layer::Conv2d {
            in_channels,
            out_channels,
            weight: he_normal(out_channels * fan_in, fan_in, rng),
            bias: vec![0.0; out_channels],
        }
    }

    /// He-normal initialized fully connected layer.
    pub fn dense(in_features: usize, out_features: usize, rng: &mut ChaCha8Rng) -> Self {
        Layer::Dense {
            in_features,
            out_features,
            weight: he_normal(in_features * out_features, in_features, rng),
            bias: vec![0.0; out_features],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv2d { .. } => "conv2d",
            Layer::MaxPool2 => "maxpool2",
            Layer::Upsample2 => "upsample2",
            Layer::Dropout { .. } => "dropout",
            Layer::Dense { .. } => "dense",
            Layer::Relu => "relu",
            Layer::Sigmoid => "sigmoid",
            Layer::Flatten => "flatten",
            Layer::Unflatten { .. } => "unflatten",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv2d { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                weight.len() + bias.len()
            }
            _ => 0,
        }
    }

    pub fn params(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Layer::Conv2d { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                Some((weight, bias))
            }
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut Vec<f64>, &mut Vec<f64>)> {
        match self {
            Layer::Conv2d { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                Some((weight, bias))
            }
            _ => None,
        }
    }

    /// Output shape for an input shape, or a dimension error.
    pub fn output_shape(&self, s: &[usize]) -> Result<Vec<usize>> {
        let bad = || Error::dimension(format!("valid input for {}", self.name()), format!("{s:?}"));
        match self {
            Layer::Conv2d {
                in_channels,
                out_channels,
                ..
            } => match s {
                [n, c, h, w] if c == in_channels => Ok(vec![*n, *out_channels, *h, *w]),
                _ => Err(bad()),
            },
            Layer::MaxPool2 => match s {
                [n, c, h, w] if h % 2 == 0 && w % 2 == 0 && *h > 0 => Ok(vec![*n, *c, h / 2, w / 2]),
                _ => Err(bad()),
            },
            Layer::Upsample2 => match s {
                [n, c, h, w] => Ok(vec![*n, *c, h * 2, w * 2]),
                _ => Err(bad()),
            },
            Layer::Dense {
                in_features,
                out_features,
                ..
            } => match s {
                [n, f] if f == in_features => Ok(vec![*n, *out_features]),
                _ => Err(bad()),
            },
            Layer::Flatten => match s {
                [n, rest @ ..] if !rest.is_empty() => Ok(vec![*n, rest.iter().product()]),
                _ => Err(bad()),
            },
            Layer::Unflatten {
                channels,
                height,
                width,
            } => match s {
                [n, f] if *f == channels * height * width => Ok(vec![*n, *channels, *height, *width]),
                _ => Err(bad()),
            },
            Layer::Relu | Layer::Sigmoid | Layer::Dropout { .. } => Ok(s.to_vec()),
        }
    }

    pub fn forward(&self, x: &Tensor, mode: &mut Mode) -> Result<(Tensor, Aux)> {
        let out_shape = self.output_shape(x.shape())?;
        let out = match self {
            Layer::Conv2d {
                in_channels,
                out_channels,
                weight,
                bias,
            } => {
                let (n, _, h, w) = x.dims4()?;
                let hw = h * w;
                let mut y = vec![0.0; n * out_channels * hw];
                let mut cols = vec![0.0; in_channels * 9 * hw];
                for i in 0..n {
                    im2col(x.item(i), *in_channels, h, w, &mut cols);
                    let yi = &mut y[i * out_channels * hw..(i + 1) * out_channels * hw];
                    for (o, chunk) in yi.chunks_mut(hw).enumerate() {
                        chunk.fill(bias[o]);
                    }
                    gemm(*out_channels, in_channels * 9, hw, 1.0, weight, false, &cols, false, 1.0, yi);
                }
                (y, Aux::None)
            }
            Layer::MaxPool2 => {
                let (n, c, h, w) = x.dims4()?;
                let (ho, wo) = (h / 2, w / 2);
                let mut y = vec![0.0; n * c * ho * wo];
                let mut arg = vec![0u32; y.len()];
                let xd = x.data();
                for p in 0..n * c {
                    let base = p * h * w;
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let mut best = base + 2 * oy * w + 2 * ox;
                            for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                                let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                                if xd[idx] > xd[best] {
                                    best = idx;
                                }
                            }
                            let o = p * ho * wo + oy * wo + ox;
                            y[o] = xd[best];
                            arg[o] = best as u32;
                        }
                    }
                }
                (y, Aux::Argmax(arg))
            }
            Layer::Upsample2 => {
                let (n, c, h, w) = x.dims4()?;
                let (ho, wo) = (2 * h, 2 * w);
                let mut y = vec![0.0; n * c * ho * wo];
                let xd = x.data();
                for p in 0..n * c {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            y[p * ho * wo + oy * wo + ox] = xd[p * h * w + (oy / 2) * w + ox / 2];
                        }
                    }
                }
                (y, Aux::None)
            }
            Layer::Dropout { rate } => match mode {
                Mode::Eval => (x.data().to_vec(), Aux::None),
                Mode::Train(rng) => {
                    let keep = 1.0 - rate;
                    let mask: Vec<f64> = (0..x.len())
                        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    let y = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
                    (y, Aux::Mask(mask))
                }
            },
            Layer::Dense {
                in_features,
                out_features,
                weight,
                bias,
            } => {
                let n = x.batch();
                let mut y = Vec::with_capacity(n * out_features);
                for _ in 0..n {
                    y.extend_from_slice(bias);
                }
                gemm(n, *in_features, *out_features, 1.0, x.data(), false, weight, true, 1.0, &mut y);
                (y, Aux::None)
            }
            Layer::Relu => (x.data().iter().map(|&v| if v > 0.0 || v.is_nan() { v } else { 0.0 }).collect(), Aux::None),
            Layer::Sigmoid => (x.data().iter().map(|&v| sigmoid(v)).collect(), Aux::None),
            Layer::Flatten | Layer::Unflatten { .. } => (x.data().to_vec(), Aux::None),
        };
        Ok((Tensor::new(out_shape, out.0)?, out.1))
    }

    /// Gradient with respect to the input; parameter gradients are accumulated into `grad`.
    pub fn backward(
        &self,
        x: &Tensor,
        y: &Tensor,
        aux: &Aux,
        dy: &Tensor,
        grad: Option<&mut ParamGrad>,
        need_input: bool,
    ) -> Result<Option<Tensor>> {
        let dx: Option<Vec<f64>> = match self {
            Layer::Conv2d {
                in_channels,
                out_channels,
                weight,
                ..
            } => {
                let (n, _, h, w) = x.dims4()?;
                let hw = h * w;
                let k = in_channels * 9;
                let mut cols = vec![0.0; k * hw];
                let mut dcols = vec![0.0; k * hw];
                let mut dx = if need_input { vec![0.0; x.len()] } else { Vec::new() };
                let mut grad = grad;
                for i in 0..n {
                    let dyi = &dy.data()[i * out_channels * hw..(i + 1) * out_channels * hw];
                    if let Some(g) = grad.as_deref_mut() {
                        im2col(x.item(i), *in_channels, h, w, &mut cols);
                        gemm(*out_channels, hw, k, 1.0, dyi, false, &cols, true, 1.0, &mut g.weight);
                        for (o, chunk) in dyi.chunks(hw).enumerate() {
                            g.bias[o] += chunk.iter().sum::<f64>();
                        }
                    }
                    if need_input {
                        gemm(k, *out_channels, hw, 1.0, weight, true, dyi, false, 0.0, &mut dcols);
                        col2im(&dcols, *in_channels, h, w, &mut dx[i * k / 9 * hw..(i + 1) * k / 9 * hw]);
                    }
                }
                need_input.then_some(dx)
            }
            Layer::MaxPool2 => {
                let Aux::Argmax(arg) = aux else {
                    return Err(Error::State("max-pool backward without forward indices".into()));
                };
                let mut dx = vec![0.0; x.len()];
                for (o, &a) in arg.iter().enumerate() {
                    dx[a as usize] += dy.data()[o];
                }
                Some(dx)
            }
            Layer::Upsample2 => {
                let (n, c, h, w) = x.dims4()?;
                let (ho, wo) = (2 * h, 2 * w);
                let mut dx = vec![0.0; x.len()];
                for p in 0..n * c {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            dx[p * h * w + (oy / 2) * w + ox / 2] += dy.data()[p * ho * wo + oy * wo + ox];
                        }
                    }
                }
                Some(dx)
            }
            Layer::Dropout { .. } => match aux {
                Aux::Mask(mask) => Some(dy.data().iter().zip(mask).map(|(a, m)| a * m).collect()),
                _ => Some(dy.data().to_vec()),
            },
            Layer::Dense {
                in_features,
                out_features,
                weight,
                ..
            } => {
                let n = x.batch();
                if let Some(g) = grad {
                    gemm(*out_features, n, *in_features, 1.0, dy.data(), true, x.data(), false, 1.0, &mut g.weight);
                    for row in dy.data().chunks(*out_features) {
                        for (b, d) in g.bias.iter_mut().zip(row) {
                            *b += d;
                        }
                    }
                }
                need_input.then(|| {
                    let mut dx = vec![0.0; n * in_features];
                    gemm(n, *out_features, *in_features, 1.0, dy.data(), false, weight, false, 0.0, &mut dx);
                    dx
                })
            }
            Layer::Relu => Some(
                dy.data()
                    .iter()
                    .zip(y.data())
                    .map(|(d, &v)| if v > 0.0 { *d } else { 0.0 })
                    .collect(),
            ),
            Layer::Sigmoid => Some(
                dy.data()
                    .iter()
                    .zip(y.data())
                    .map(|(d, &v)| d * v * (1.0 - v))
                    .collect(),
            ),
            Layer::Flatten | Layer::Unflatten { .. } => Some(dy.data().to_vec()),
        };
        match dx {
            Some(d) if need_input => Ok(Some(Tensor::new(x.shape().to_vec(), d)?)),
            _ => Ok(None),
        }
    }

    pub(crate) fn zero_grad(&self) -> Option<ParamGrad> {
        self.params().map(|(w, b)| ParamGrad {
            weight: vec![0.0; w.len()],
            bias: vec![0.0; b.len()],
        })
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn he_normal(n: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// `x` is one `[c, h, w]` item; `cols` is `[c*9, h*w]`.
fn im2col(x: &[f64], c: usize, h: usize, w: usize, cols: &mut [f64]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ci * 9 + ky * 3 + kx) * hw..(ci * 9 + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    let out = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        out.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    for (xo, o) in out.iter_mut().enumerate() {
                        let sx = xo as isize + kx as isize - 1;
                        *o = if sx < 0 || sx >= w as isize { 0.0 } else { src[sx as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates `cols` into `x`.
fn col2im(cols: &[f64], c: usize, h: usize, w: usize, x: &mut [f64]) {
    let hw = h * w;
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ci * 9 + ky * 3 + kx) * hw..(ci * 9 + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = ci * hw + sy as usize * w;
                    for xo in 0..w {
                        let sx = xo as isize + kx as isize - 1;
                        if sx >= 0 && sx < w as isize {
                            x[dst + sx as usize] += row[y * w + xo];
                        }
                    }
                }
            }
        }
    }
}
