//! Small CPU neural-network substrate: tensors, layers with hand-written
//! backward passes, Adam and JSON checkpoints.

mod adam;
mod checkpoint;
mod gemm;
pub(crate) use gemm::gemm;
mod layers;
mod sequential;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{content_hash, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use layers::{sigmoid, Aux, Layer, Mode, ParamGrad};
pub use sequential::{flat_grads, Backward, Sequential, Trace};
pub use tensor::{mse, Tensor};

use crate::error::Result;

/// Analytic versus central-difference parameter gradients of an MSE loss.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub max_abs_grad: f64,
}

/// Compares analytic gradients of `mse(net(x), target)` to central differences.
///
/// Relative errors use `max(|analytic|, |numeric|, floor)` as denominator, with
/// `floor = 1e-5 · max |gradient|` so round-off on vanishing entries does not dominate.
pub fn grad_check(net: &Sequential, x: &Tensor, target: &Tensor, h: f64) -> Result<GradCheckReport> {
    let trace = net.forward(x, &mut Mode::Eval)?;
    let (_, dy) = mse(trace.output(), target)?;
    let analytic = flat_grads(&net.backward(&trace, dy, false, None)?.grads);
    let base = net.flat_params();
    let mut probe = net.clone();
    let mut numeric = vec![0.0; base.len()];
    let mut p = base.clone();
    for i in 0..base.len() {
        p[i] = base[i] + h;
        probe.set_flat_params(&p);
        let fp = mse(&probe.predict(x)?, target)?.0;
        p[i] = base[i] - h;
        probe.set_flat_params(&p);
        let fm = mse(&probe.predict(x)?, target)?.0;
        p[i] = base[i];
        numeric[i] = (fp - fm) / (2.0 * h);
    }
    let max_abs_grad = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = (1e-5 * max_abs_grad).max(1e-12);
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    for (a, n) in analytic.iter().zip(&numeric) {
        let d = (a - n).abs();
        max_abs = max_abs.max(d);
        max_rel = max_rel.max(d / a.abs().max(n.abs()).max(floor));
    }
    Ok(GradCheckReport {
        n_params: base.len(),
        max_abs_error: max_abs,
        max_rel_error: max_rel,
        max_abs_grad,
    })
}
