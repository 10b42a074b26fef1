use serde::{Deserialize, Serialize};

use super::layers::{Aux, Layer, Mode, ParamGrad};
use super::tensor::Tensor;
use crate::error::Result;

/// Layers applied in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

/// Activations and auxiliary data recorded by [`Sequential::forward`].
#[derive(Clone, Debug)]
pub struct Trace {
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`.
    pub acts: Vec<Tensor>,
    aux: Vec<Aux>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.acts.last().expect("trace holds the input")
    }
}

/// Result of [`Sequential::backward`].
#[derive(Clone, Debug)]
pub struct Backward {
    /// One entry per layer; `None` for layers without parameters.
    pub grads: Vec<Option<ParamGrad>>,
    /// Gradient with respect to the network input, if requested.
    pub input: Option<Tensor>,
    /// Gradient with respect to the output of the tapped layer, if requested.
    pub tap: Option<Tensor>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut s = input.to_vec();
        for l in &self.layers {
            s = l.output_shape(&s)?;
        }
        Ok(s)
    }

    pub fn forward(&self, x: &Tensor, mode: &mut Mode) -> Result<Trace> {
        let mut acts = vec![x.clone()];
        let mut aux = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (y, a) = l.forward(acts.last().expect("nonempty"), mode)?;
            acts.push(y);
            aux.push(a);
        }
        Ok(Trace { acts, aux })
    }

    /// Inference without keeping intermediate activations.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for l in &self.layers {
            cur = l.forward(&cur, &mut Mode::Eval)?.0;
        }
        Ok(cur)
    }

    /// Back-propagates `dy` (gradient of the loss with respect to the output).
    /// `tap` selects a layer whose output gradient is returned as well.
    pub fn backward(&self, trace: &Trace, dy: Tensor, need_input: bool, tap: Option<usize>) -> Result<Backward> {
        let n = self.layers.len();
        let mut grads: Vec<Option<ParamGrad>> = self.layers.iter().map(Layer::zero_grad).collect();
        let mut tapped = None;
        let mut cur = dy;
        for i in (0..n).rev() {
            if tap == Some(i) {
                tapped = Some(cur.clone());
            }
            let needed = i > 0 || need_input;
            let dx = self.layers[i].backward(
                &trace.acts[i],
                &trace.acts[i + 1],
                &trace.aux[i],
                &cur,
                grads[i].as_mut(),
                needed,
            )?;
            match dx {
                Some(d) => cur = d,
                None => {
                    return Ok(Backward {
                        grads,
                        input: None,
                        tap: tapped,
                    })
                }
            }
        }
        Ok(Backward {
            grads,
            input: need_input.then_some(cur),
            tap: tapped,
        })
    }

    /// Flattened parameter vector (weights then bias, layer by layer).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.layers.iter().filter_map(Layer::params) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut k = 0;
        for (w, b) in self.layers.iter_mut().filter_map(Layer::params_mut) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            b.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
    }
}

/// Flattens per-layer gradients in the order of [`Sequential::flat_params`].
pub fn flat_grads(grads: &[Option<ParamGrad>]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads.iter().flatten() {
        out.extend_from_slice(&g.weight);
        out.extend_from_slice(&g.bias);
    }
    out
}
