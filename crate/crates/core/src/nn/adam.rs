use serde::{Deserialize, Serialize};

use super::layers::ParamGrad;
use super::sequential::Sequential;

/// Adam hyperparameters; the step size decays as `lr / (1 + decay * t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            decay: 0.0,
        }
    }
}

/// Adam state over the parameters of one or more networks, in a fixed order.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, nets: &[&Sequential]) -> Self {
        let n: usize = nets.iter().map(|s| s.param_count()).sum();
        Self {
            cfg,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Replaces the base learning rate; moment estimates are kept.
    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    /// Applies one update; `grads[k]` belongs to `nets[k]`.
    pub fn step(&mut self, nets: &mut [&mut Sequential], grads: &[&[Option<ParamGrad>]]) {
        let c = self.cfg;
        let lr = c.lr / (1.0 + c.decay * self.t as f64);
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let mut k = 0;
        for (net, g) in nets.iter_mut().zip(grads) {
            for (layer, lg) in net.layers.iter_mut().zip(g.iter()) {
                let (Some((w, b)), Some(lg)) = (layer.params_mut(), lg) else {
                    continue;
                };
                for (p, gr) in w.iter_mut().chain(b.iter_mut()).zip(lg.weight.iter().chain(&lg.bias)) {
                    let m = &mut self.m[k];
                    let v = &mut self.v[k];
                    *m = c.beta1 * *m + (1.0 - c.beta1) * gr;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * gr * gr;
                    *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + c.eps);
                    k += 1;
                }
            }
        }
    }
}
