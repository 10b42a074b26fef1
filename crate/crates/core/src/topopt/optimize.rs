use serde::{Deserialize, Serialize};

use super::problem::{physical_field, Context, DensityField, TopOptProblem};
use crate::error::Result;

/// Outcome of [`optimize`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopOptResult {
    pub density: DensityField,
    pub compliance_history: Vec<f64>,
    pub objective_history: Vec<f64>,
    pub volume_history: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
    /// Projection sharpness of the returned field.
    pub beta: f64,
}

impl TopOptResult {
    /// Final mean physical density over the design region.
    pub fn final_volume(&self, problem: &TopOptProblem) -> f64 {
        problem.volume(&self.density.physical)
    }
}

/// Projected gradient descent with move limits and an exact volume equality on the
/// projected densities (bisection on the multiplier), with β continuation.
pub fn optimize(problem: &TopOptProblem) -> Result<TopOptResult> {
    let s = &problem.settings;
    let ctx = problem.context()?;
    let target = problem.vol_frac;
    let interval = (s.max_iter / 5).max(1);

    let mut raw = problem.uniform_raw(target);
    let mut beta = 1.0;
    let mut field = physical_field(&problem.domain, &ctx.filter, &raw, beta, s.eta);
    let mut step = s.move_limit;
    let mut prev_objective = f64::INFINITY;
    let mut since_beta = 0;
    let mut converged = false;
    let (mut ch, mut oh, mut vh) = (Vec::new(), Vec::new(), Vec::new());

    for _ in 0..s.max_iter {
        let sens = problem.evaluate(&ctx, &field, beta)?;
        ch.push(sens.compliance);
        oh.push(sens.value);
        vh.push(volume(&ctx, &field.physical));

        if sens.value > prev_objective {
            step = (step * 0.5).max(0.02 * s.move_limit);
        } else {
            step = (step * 1.2).min(s.move_limit);
        }
        prev_objective = sens.value;

        let vol_grad = ctx.chain_volume(&field, beta, s.eta);
        let next = update(problem, &ctx, &raw, &sens.grad_raw, &vol_grad, step, beta, target);
        let next_field = physical_field(&problem.domain, &ctx.filter, &next, beta, s.eta);
        let change = ctx
            .design
            .iter()
            .map(|&e| (next_field.physical[e] - field.physical[e]).abs())
            .fold(0.0, f64::max);
        raw = next;
        field = next_field;
        since_beta += 1;

        if change < s.tolerance || since_beta >= interval {
            if beta < s.beta_max {
                beta = (beta * 2.0).min(s.beta_max);
                since_beta = 0;
                step = s.move_limit;
                prev_objective = f64::INFINITY;
                field = physical_field(&problem.domain, &ctx.filter, &raw, beta, s.eta);
            } else if change < s.tolerance {
                converged = true;
                break;
            }
        }
    }

    if (volume(&ctx, &field.physical) - target).abs() > 1e-4 {
        raw = shift_to_volume(problem, &ctx, &raw, beta, target);
        field = physical_field(&problem.domain, &ctx.filter, &raw, beta, s.eta);
    }
    Ok(TopOptResult {
        density: field,
        iterations_used: ch.len(),
        compliance_history: ch,
        objective_history: oh,
        volume_history: vh,
        converged,
        beta,
    })
}

fn volume(ctx: &Context, physical: &[f64]) -> f64 {
    ctx.design.iter().map(|&e| physical[e]).sum::<f64>() / ctx.design.len() as f64
}

impl Context {
    fn chain_volume(&self, field: &DensityField, beta: f64, eta: f64) -> Vec<f64> {
        let mut g = vec![0.0; field.physical.len()];
        let w = 1.0 / self.design.len() as f64;
        for &e in &self.design {
            g[e] = w;
        }
        super::problem::chain_to_raw(self, field, &g, beta, eta)
    }
}

#[allow(clippy::too_many_arguments)]
fn update(
    problem: &TopOptProblem,
    ctx: &Context,
    raw: &[f64],
    grad: &[f64],
    vol_grad: &[f64],
    step: f64,
    beta: f64,
    target: f64,
) -> Vec<f64> {
    let s = &problem.settings;
    let gmax = ctx.design.iter().map(|&e| grad[e].abs()).fold(0.0, f64::max);
    let vmax = ctx.design.iter().map(|&e| vol_grad[e].abs()).fold(0.0, f64::max);
    let gs = if gmax > 0.0 { 1.0 / gmax } else { 0.0 };
    let vs = if vmax > 0.0 { 1.0 / vmax } else { 0.0 };
    let candidate = |mu: f64| -> Vec<f64> {
        let mut x = raw.to_vec();
        for &e in &ctx.design {
            let lo = (raw[e] - s.move_limit).max(0.0);
            let hi = (raw[e] + s.move_limit).min(1.0);
            x[e] = (raw[e] - step * (grad[e] * gs + mu * vol_grad[e] * vs)).clamp(lo, hi);
        }
        x
    };
    let vol_at = |x: &[f64]| volume(ctx, &physical_field(&problem.domain, &ctx.filter, x, beta, s.eta).physical);

    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..60 {
        if vol_at(&candidate(lo)) >= target {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..60 {
        if vol_at(&candidate(hi)) <= target {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if vol_at(&candidate(mid)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    candidate(0.5 * (lo + hi))
}

/// Uniform shift of the raw design variables that meets the volume target.
fn shift_to_volume(problem: &TopOptProblem, ctx: &Context, raw: &[f64], beta: f64, target: f64) -> Vec<f64> {
    let shifted = |t: f64| -> Vec<f64> {
        let mut x = raw.to_vec();
        for &e in &ctx.design {
            x[e] = (raw[e] + t).clamp(0.0, 1.0);
        }
        x
    };
    let vol_at = |t: f64| {
        volume(
            ctx,
            &physical_field(&problem.domain, &ctx.filter, &shifted(t), beta, problem.settings.eta).physical,
        )
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if vol_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    shifted(0.5 * (lo + hi))
}
