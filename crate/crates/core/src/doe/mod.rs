//! Design of experiments in the latent space: a Gaussian fit of the encoded
//! training cloud, Latin hypercube sampling from it, snapping samples to the
//! nearest training designs, similarity filtering and a coverage metric.

use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::designspace::DesignSet;
use crate::error::{Error, Result};

/// Sample mean, covariance and its (jittered) Cholesky factor.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Lower-triangular factor of `cov + jitter·I`.
    pub chol: DMatrix<f64>,
    pub jitter: f64,
}

impl LatentGaussian {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn check_rows(z: &[Vec<f64>]) -> Result<usize> {
    let d = z.first().map_or(0, Vec::len);
    if let Some(bad) = z.iter().find(|r| r.len() != d) {
        return Err(Error::dimension(d, bad.len()));
    }
    Ok(d)
}

/// Fits mean and unbiased covariance; adds `1e-8·max(trace/d, 1)` (growing tenfold
/// per retry) to the diagonal when the Cholesky factorization fails.
pub fn fit_latent_gaussian(z: &[Vec<f64>]) -> Result<LatentGaussian> {
    if z.len() < 2 {
        return Err(Error::validation(format!("need at least 2 latent rows, got {}", z.len())));
    }
    let d = check_rows(z)?;
    let n = z.len() as f64;
    let mut mean = DVector::zeros(d);
    for row in z {
        mean += DVector::from_column_slice(row);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for row in z {
        let c = DVector::from_column_slice(row) - &mean;
        cov += &c * c.transpose();
    }
    cov /= n - 1.0;
    let base = 1e-8 * (cov.trace() / d as f64).max(1.0);
    let mut jitter = 0.0;
    for attempt in 0..12 {
        let m = &cov + DMatrix::identity(d, d) * jitter;
        if let Some(ch) = m.cholesky() {
            return Ok(LatentGaussian {
                mean,
                cov,
                chol: ch.l(),
                jitter,
            });
        }
        jitter = base * 10f64.powi(attempt);
    }
    Err(Error::Numeric {
        message: "covariance could not be factorized even with jitter".into(),
        residual: jitter,
    })
}

/// Standard-normal Latin hypercube scores: column `j` of sample `i` lies in
/// stratum `π_j(i)` of `n` equal-probability strata. `centered` places each point
/// at its stratum's median.
pub fn lhs_scores(n: usize, d: usize, seed: u64, centered: bool) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::standard();
    let mut out = vec![vec![0.0; d]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(&mut rng);
        for (i, &stratum) in perm.iter().enumerate() {
            let u: f64 = if centered { 0.5 } else { rng.sample(Open01) };
            out[i][j] = normal.inverse_cdf((stratum as f64 + u) / n as f64);
        }
    }
    out
}

/// Latin hypercube sample of the fitted normal: stratified scores, then `mean + L·s`.
pub fn lhs_normal(n: usize, g: &LatentGaussian, seed: u64, centered: bool) -> Vec<Vec<f64>> {
    lhs_scores(n, g.dim(), seed, centered)
        .into_iter()
        .map(|s| (&g.mean + &g.chol * DVector::from_vec(s)).iter().copied().collect())
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest row (lowest index on ties).
pub fn nearest(sample: &[f64], cloud: &[Vec<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in cloud.iter().enumerate() {
        let d = sq_dist(sample, row);
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Designs chosen by snapping, with the sample-to-design map.
#[derive(Clone, Debug)]
pub struct Snapped {
    pub set: DesignSet,
    /// Row index into the cloud/design set for every sample.
    pub sample_to_design: Vec<usize>,
    /// Distinct selected design indices in first-selection order.
    pub selected: Vec<usize>,
}

/// Maps each sample to its nearest cloud row; each design is emitted once.
pub fn snap_to_nearest(samples: &[Vec<f64>], cloud: &[Vec<f64>], designs: &DesignSet) -> Result<Snapped> {
    if cloud.is_empty() {
        return Err(Error::validation("latent cloud is empty"));
    }
    if cloud.len() != designs.len() {
        return Err(Error::dimension(designs.len(), cloud.len()));
    }
    let d = check_rows(cloud)?;
    let mut mapping = Vec::with_capacity(samples.len());
    for s in samples {
        if s.len() != d {
            return Err(Error::dimension(d, s.len()));
        }
        mapping.push(nearest(s, cloud).expect("nonempty cloud"));
    }
    let mut selected = Vec::new();
    let mut seen = vec![false; cloud.len()];
    for &m in &mapping {
        if !seen[m] {
            seen[m] = true;
            selected.push(m);
        }
    }
    let mut set = DesignSet::new();
    for &i in &selected {
        let mut meta = designs.meta(i).clone();
        let samples: Vec<Value> = mapping
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == i)
            .map(|(s, _)| Value::from(s))
            .collect();
        meta.insert("doe_samples".into(), Value::Array(samples));
        set.push(designs.items()[i].clone(), meta)?;
    }
    Ok(Snapped {
        set,
        sample_to_design: mapping,
        selected,
    })
}

/// Greedy filter in order: keeps an item iff its latent Euclidean distance to every
/// kept item is at least `threshold`. Returns kept indices.
pub fn filter_similar(z: &[Vec<f64>], threshold: f64) -> Vec<usize> {
    let t2 = threshold * threshold;
    let mut kept: Vec<usize> = Vec::new();
    for (i, row) in z.iter().enumerate() {
        if kept.iter().all(|&k| sq_dist(row, &z[k]) >= t2) {
            kept.push(i);
        }
    }
    kept
}

/// Applies [`filter_similar`] to a design set with matching latent rows.
pub fn filter_similar_set(designs: &DesignSet, z: &[Vec<f64>], threshold: f64) -> Result<(DesignSet, Vec<usize>)> {
    if z.len() != designs.len() {
        return Err(Error::dimension(designs.len(), z.len()));
    }
    let kept = filter_similar(z, threshold);
    Ok((designs.select(&kept)?, kept))
}

/// Per-dimension min/max of a reference cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(cloud: &[Vec<f64>]) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::validation("cannot normalize against an empty cloud"));
        }
        let d = check_rows(cloud)?;
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in cloud {
            for j in 0..d {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        Ok(Self { min, max })
    }

    /// Maps to `[0, 1]` per dimension; dimensions without range map to 0.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let r = self.max[j] - self.min[j];
                if r > 0.0 {
                    (v - self.min[j]) / r
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Mean pairwise L1 distance between normalized rows.
pub fn coverage_metric(rows: &[Vec<f64>], norm: &Normalizer) -> Result<f64> {
    if rows.len() < 2 {
        return Err(Error::validation(format!("coverage needs at least 2 rows, got {}", rows.len())));
    }
    let d = check_rows(rows)?;
    if d != norm.min.len() {
        return Err(Error::dimension(norm.min.len(), d));
    }
    let z: Vec<Vec<f64>> = rows.iter().map(|r| norm.apply(r)).collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            total += z[i].iter().zip(&z[j]).map(|(a, b)| (a - b).abs()).sum::<f64>();
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Sampling plan for the latent DOE stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoePlan {
    pub n_samples: usize,
    pub seed: u64,
    pub snap: bool,
    /// Latent-distance threshold for [`filter_similar`]; 0 disables filtering.
    pub filter_threshold: f64,
}

impl Default for DoePlan {
    fn default() -> Self {
        Self {
            n_samples: 100,
            seed: 0,
            snap: true,
            filter_threshold: 0.0,
        }
    }
}

#[cfg(test)]
mod tests;
