use serde::{Deserialize, Serialize};

use super::domain::{ElementKind, WheelDomain};
use super::fem::{simp_modulus, Fem2d, FemState2D};
use super::filter::{project, project_derivative, DensityFilter};
use crate::designspace::DesignImage;
use crate::error::{Error, Result};

/// Numerical settings shared by every problem of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopOptSettings {
    pub penal: f64,
    pub e0: f64,
    /// `E_min / E_0`.
    pub emin_ratio: f64,
    pub nu: f64,
    /// Filter radius in elements.
    pub r_min: f64,
    pub eta: f64,
    /// Final projection sharpness; β doubles from 1 up to this value.
    pub beta_max: f64,
    pub max_iter: usize,
    pub move_limit: f64,
    /// Stop (or advance β) once `max |Δx̄|` drops below this.
    pub tolerance: f64,
}

impl Default for TopOptSettings {
    fn default() -> Self {
        Self {
            penal: 3.0,
            e0: 1.0,
            emin_ratio: 1e-9,
            nu: 0.3,
            r_min: 1.5,
            eta: 0.5,
            beta_max: 16.0,
            max_iter: 100,
            move_limit: 0.2,
            tolerance: 0.01,
        }
    }
}

impl TopOptSettings {
    pub fn validate(&self) -> Result<()> {
        if self.penal < 1.0 {
            return Err(Error::validation("penal must be >= 1"));
        }
        if !(self.e0 > 0.0) || !(self.emin_ratio > 0.0 && self.emin_ratio < 1.0) {
            return Err(Error::validation("need e0 > 0 and 0 < emin_ratio < 1"));
        }
        if !(self.nu > -1.0 && self.nu < 0.5) {
            return Err(Error::validation("Poisson ratio must be in (-1, 0.5)"));
        }
        if !(self.r_min >= 1.0) {
            return Err(Error::validation(format!("r_min must be >= 1, got {}", self.r_min)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) || !(self.beta_max >= 1.0) {
            return Err(Error::validation("need 0 < eta < 1 and beta_max >= 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("max_iter must be >= 1"));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return Err(Error::validation("move_limit must be in (0, 1]"));
        }
        Ok(())
    }

    pub fn emin(&self) -> f64 {
        self.e0 * self.emin_ratio
    }
}

/// Raw, filtered and projected densities over all elements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub raw: Vec<f64>,
    pub filtered: Vec<f64>,
    pub physical: Vec<f64>,
}

/// Objective value and its gradients.
#[derive(Clone, Debug)]
pub struct Sensitivity {
    pub value: f64,
    pub compliance: f64,
    pub l1: f64,
    /// d(value)/d(x̄) per element (zero off the design region).
    pub grad_physical: Vec<f64>,
    /// d(value)/d(x) per element (zero off the design region).
    pub grad_raw: Vec<f64>,
    pub state: FemState2D,
}

/// Compliance plus weighted L1 distance to a binary reference, under a volume equality.
#[derive(Clone, Debug)]
pub struct TopOptProblem {
    pub domain: WheelDomain,
    /// Binary reference density per element.
    pub reference: Vec<f64>,
    pub lambda: f64,
    /// Target mean physical density over the design region.
    pub vol_frac: f64,
    pub settings: TopOptSettings,
}

impl TopOptProblem {
    pub fn new(
        domain: WheelDomain,
        reference: &DesignImage,
        lambda: f64,
        vol_frac: f64,
        settings: TopOptSettings,
    ) -> Result<Self> {
        let field = domain
            .sample_image(reference)?
            .into_iter()
            .map(|v| if v >= 0.5 { 1.0 } else { 0.0 })
            .collect();
        Self::with_reference_field(domain, field, lambda, vol_frac, settings)
    }

    pub fn with_reference_field(
        domain: WheelDomain,
        reference: Vec<f64>,
        lambda: f64,
        vol_frac: f64,
        settings: TopOptSettings,
    ) -> Result<Self> {
        settings.validate()?;
        if reference.len() != domain.n_elements() {
            return Err(Error::dimension(domain.n_elements(), reference.len()));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::validation(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(vol_frac > 0.0) {
            return Err(Error::validation(format!("vol_frac must be > 0, got {vol_frac}")));
        }
        if vol_frac > 1.0 {
            return Err(Error::validation(format!(
                "volume target {vol_frac} exceeds the design-space capacity"
            )));
        }
        if domain.n_design() == 0 {
            return Err(Error::validation("domain has no design elements"));
        }
        Ok(Self {
            domain,
            reference,
            lambda,
            vol_frac,
            settings,
        })
    }

    /// Reference material fraction inside the design region.
    pub fn reference_fraction(&self) -> f64 {
        let (mut s, mut n) = (0.0, 0);
        for e in self.domain.design_elements() {
            s += self.reference[e];
            n += 1;
        }
        s / n as f64
    }

    pub(crate) fn context(&self) -> Result<Context> {
        let d = &self.domain;
        Ok(Context {
            fem: Fem2d::new(d, self.settings.nu)?,
            filter: DensityFilter::new(d.nelx(), d.nely(), self.settings.r_min),
            design: d.design_elements().collect(),
        })
    }

    /// Raw field with every design element at `value` and the rest pinned.
    pub fn uniform_raw(&self, value: f64) -> Vec<f64> {
        self.domain
            .kinds()
            .iter()
            .map(|k| k.pinned_density().unwrap_or(value))
            .collect()
    }

    pub fn filter_and_project(&self, raw: &[f64], beta: f64) -> DensityField {
        let filter = DensityFilter::new(self.domain.nelx(), self.domain.nely(), self.settings.r_min);
        physical_field(&self.domain, &filter, raw, beta, self.settings.eta)
    }

    /// Mean physical density over the design region.
    pub fn volume(&self, physical: &[f64]) -> f64 {
        let design: Vec<usize> = self.domain.design_elements().collect();
        design.iter().map(|&e| physical[e]).sum::<f64>() / design.len() as f64
    }

    pub fn objective_and_sensitivity(&self, raw: &[f64], beta: f64) -> Result<Sensitivity> {
        let ctx = self.context()?;
        let field = physical_field(&self.domain, &ctx.filter, raw, beta, self.settings.eta);
        self.evaluate(&ctx, &field, beta)
    }

    pub(crate) fn evaluate(&self, ctx: &Context, field: &DensityField, beta: f64) -> Result<Sensitivity> {
        let s = &self.settings;
        let emin = s.emin();
        let young: Vec<f64> = field
            .physical
            .iter()
            .map(|&x| simp_modulus(x, s.penal, s.e0, emin))
            .collect();
        let state = ctx.fem.solve(&self.domain, &young)?;
        let n = self.domain.n_elements();
        let mut grad_physical = vec![0.0; n];
        let mut l1 = 0.0;
        for &e in &ctx.design {
            let x = field.physical[e];
            let diff = self.reference[e] - x;
            l1 += diff.abs();
            let dc = -s.penal * x.powf(s.penal - 1.0) * (s.e0 - emin) * state.element_energy[e];
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            grad_physical[e] = dc - self.lambda * sign;
        }
        let grad_raw = chain_to_raw(ctx, field, &grad_physical, beta, s.eta);
        Ok(Sensitivity {
            value: state.compliance + self.lambda * l1,
            compliance: state.compliance,
            l1,
            grad_physical,
            grad_raw,
            state,
        })
    }
}

pub(crate) struct Context {
    pub fem: Fem2d,
    pub filter: DensityFilter,
    pub design: Vec<usize>,
}

pub(crate) fn physical_field(
    domain: &WheelDomain,
    filter: &DensityFilter,
    raw: &[f64],
    beta: f64,
    eta: f64,
) -> DensityField {
    let filtered = filter.apply(raw);
    let physical = domain
        .kinds()
        .iter()
        .zip(&filtered)
        .map(|(k, &xt)| match k {
            ElementKind::Design => project(xt, beta, eta).clamp(0.0, 1.0),
            other => other.pinned_density().unwrap_or(0.0),
        })
        .collect();
    DensityField {
        raw: raw.to_vec(),
        filtered,
        physical,
    }
}

/// Pulls d/dx̄ on design elements back through projection and filter to raw
/// design variables.
pub(crate) fn chain_to_raw(
    ctx: &Context,
    field: &DensityField,
    grad_physical: &[f64],
    beta: f64,
    eta: f64,
) -> Vec<f64> {
    let mut g_tilde = vec![0.0; grad_physical.len()];
    for &e in &ctx.design {
        g_tilde[e] = grad_physical[e] * project_derivative(field.filtered[e], beta, eta);
    }
    let full = ctx.filter.apply_transpose(&g_tilde);
    let mut out = vec![0.0; full.len()];
    for &e in &ctx.design {
        out[e] = full[e];
    }
    out
}
