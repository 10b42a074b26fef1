use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::domain::{DomainSpec, WheelDomain};
use super::optimize::optimize;
use super::problem::{TopOptProblem, TopOptSettings};
use crate::designspace::{DesignImage, DesignSet, Provenance};
use crate::error::{Error, Result};

/// Level grids whose Cartesian product defines the problems of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepLevels {
    pub lambda: Vec<f64>,
    pub shear_ratio: Vec<f64>,
    /// Multipliers on the reference's material fraction in the design region.
    pub vol_frac: Vec<f64>,
}

impl Default for SweepLevels {
    fn default() -> Self {
        Self {
            lambda: vec![0.0005, 0.005, 0.05, 0.5, 5.0],
            shear_ratio: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            vol_frac: vec![0.7, 0.8, 0.9, 1.0, 1.1],
        }
    }
}

impl SweepLevels {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_empty() || self.shear_ratio.is_empty() || self.vol_frac.is_empty() {
            return Err(Error::validation("sweep level lists must be nonempty"));
        }
        Ok(())
    }

    pub fn combinations(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &l in &self.lambda {
            for &s in &self.shear_ratio {
                for &v in &self.vol_frac {
                    out.push((l, s, v));
                }
            }
        }
        out
    }
}

/// One manifest row of a sweep; failures are recorded rather than aborting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub id: String,
    pub reference_id: String,
    pub lambda: f64,
    pub shear_ratio: f64,
    pub vol_frac: f64,
    /// Absolute design-region volume target after clipping.
    pub target_fraction: f64,
    /// `"ok"` or `"failed: <reason>"`.
    pub status: String,
    pub compliance: Option<f64>,
    /// L1 distance between the binarized result and the binarized reference.
    pub l1_to_reference: Option<f64>,
    /// Same distance restricted to the design region, divided by its element count.
    pub l1_design_normalized: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub set: DesignSet,
    pub rows: Vec<SweepRow>,
}

/// Runs one optimization per level combination for `reference`.
pub fn sweep(
    reference: &DesignImage,
    levels: &SweepLevels,
    spec: &DomainSpec,
    settings: &TopOptSettings,
) -> Result<SweepOutput> {
    levels.validate()?;
    let base = WheelDomain::wheel(spec)?;
    let ref_field: Vec<f64> = base
        .sample_image(reference)?
        .into_iter()
        .map(|v| if v >= 0.5 { 1.0 } else { 0.0 })
        .collect();
    let design: Vec<usize> = base.design_elements().collect();
    let ref_frac = design.iter().map(|&e| ref_field[e]).sum::<f64>() / design.len().max(1) as f64;

    let combos = levels.combinations();
    let results: Vec<(SweepRow, Option<DesignImage>)> = combos
        .par_iter()
        .enumerate()
        .map(|(k, &(lambda, shear, mult))| {
            let id = format!("{}_t{:03}", reference.id(), k);
            let target = (mult * ref_frac).min(1.0);
            let start = Instant::now();
            let run = || -> Result<(f64, usize, bool, Vec<f64>)> {
                let domain = WheelDomain::wheel(&DomainSpec {
                    shear_ratio: shear,
                    ..spec.clone()
                })?;
                let problem = TopOptProblem::with_reference_field(
                    domain,
                    ref_field.clone(),
                    lambda,
                    target,
                    settings.clone(),
                )?;
                let res = optimize(&problem)?;
                let c = *res.compliance_history.last().unwrap_or(&f64::NAN);
                Ok((c, res.iterations_used, res.converged, res.density.physical))
            };
            let outcome = run();
            let seconds = start.elapsed().as_secs_f64();
            let mut row = SweepRow {
                id: id.clone(),
                reference_id: reference.id().to_string(),
                lambda,
                shear_ratio: shear,
                vol_frac: mult,
                target_fraction: target,
                status: "ok".into(),
                compliance: None,
                l1_to_reference: None,
                l1_design_normalized: None,
                iterations: 0,
                converged: false,
                seconds,
            };
            match outcome {
                Ok((c, iters, conv, physical)) => {
                    let n = spec.grid;
                    let img = DesignImage::from_fn(id, Provenance::Topopt, n, |x, y| {
                        if physical[y * n + x] >= 0.5 {
                            1.0
                        } else {
                            0.0
                        }
                    });
                    match img {
                        Ok(img) => {
                            row.compliance = Some(c);
                            row.iterations = iters;
                            row.converged = conv;
                            row.l1_to_reference = Some(
                                img.pixels()
                                    .iter()
                                    .zip(&ref_field)
                                    .map(|(a, b)| (a - b).abs())
                                    .sum(),
                            );
                            row.l1_design_normalized = Some(
                                design
                                    .iter()
                                    .map(|&e| (img.pixels()[e] - ref_field[e]).abs())
                                    .sum::<f64>()
                                    / design.len() as f64,
                            );
                            (row, Some(img))
                        }
                        Err(e) => {
                            row.status = format!("failed: {e}");
                            (row, None)
                        }
                    }
                }
                Err(e) => {
                    row.status = format!("failed: {e}");
                    (row, None)
                }
            }
        })
        .collect();

    let mut set = DesignSet::new();
    let mut rows = Vec::with_capacity(results.len());
    for (row, img) in results {
        if let Some(img) = img {
            let meta = json!({
                "source": row.reference_id,
                "lambda": row.lambda,
                "shear_ratio": row.shear_ratio,
                "vol_frac": row.vol_frac,
                "compliance": row.compliance,
            });
            let serde_json::Value::Object(meta) = meta else { unreachable!() };
            set.push(img, meta)?;
        }
        rows.push(row);
    }
    Ok(SweepOutput { set, rows })
}
