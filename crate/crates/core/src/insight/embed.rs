use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMethod {
    Tsne,
    Pca,
}

/// Two-dimensional coordinates per item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub coords: Vec<[f64; 2]>,
    pub method: EmbedMethod,
    pub seed: u64,
    /// KL divergence at each logged iteration (t-SNE only).
    pub kl_history: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    /// `None` picks `max(N / (4 · exaggeration), 50)`.
    pub learning_rate: Option<f64>,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: None,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
        }
    }
}

pub const TSNE_MAX_POINTS: usize = 5000;

fn sq_distances(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b).powi(2)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Conditional affinities `p_{j|i}` with bandwidths bisected to the target
/// perplexity; returns the row-major matrix and the achieved perplexities.
pub fn conditional_affinities(x: &[Vec<f64>], perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let d = sq_distances(x);
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut achieved = vec![0.0; n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let di = &d[i * n..(i + 1) * n];
        let dmin = di
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .fold(f64::INFINITY, f64::min);
        let (mut lo, mut hi, mut beta) = (0.0, f64::INFINITY, 1.0);
        let mut entropy = 0.0;
        for _ in 0..200 {
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-(di[j] - dmin) * beta).exp() };
                sum += row[j];
            }
            let mut dot = 0.0;
            for j in 0..n {
                row[j] /= sum;
                dot += row[j] * (di[j] - dmin);
            }
            // H = log(sum) + beta * E[d - dmin], with sum over shifted kernels
            entropy = sum.ln() + beta * dot;
            let diff = entropy - target;
            if diff.abs() < 1e-10 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        achieved[i] = entropy.exp();
        p[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    (p, achieved)
}

fn kl_divergence(p: &[f64], q_num: &[f64], q_sum: f64) -> f64 {
    p.iter()
        .zip(q_num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &qn)| pij * (pij / (qn / q_sum).max(1e-300)).ln())
        .sum()
}

/// Exact t-SNE. Identical input rows are embedded once and share coordinates.
pub fn tsne(x: &[Vec<f64>], cfg: &TsneConfig) -> Result<Embedding2D> {
    if x.len() > TSNE_MAX_POINTS {
        return Err(Error::validation(format!(
            "exact t-SNE is limited to {TSNE_MAX_POINTS} points, got {}",
            x.len()
        )));
    }
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut unique: Vec<Vec<f64>> = Vec::new();
    let map: Vec<usize> = x
        .iter()
        .map(|p| {
            let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
            *index.entry(key).or_insert_with(|| {
                unique.push(p.clone());
                unique.len() - 1
            })
        })
        .collect();
    let mut e = tsne_distinct(&unique, cfg)?;
    e.coords = map.iter().map(|&u| e.coords[u]).collect();
    Ok(e)
}

fn tsne_distinct(x: &[Vec<f64>], cfg: &TsneConfig) -> Result<Embedding2D> {
    let n = x.len();
    if !(cfg.perplexity >= 5.0 && cfg.perplexity <= n as f64 / 3.0) {
        return Err(Error::validation(format!(
            "perplexity {} must be in [5, N/3 = {:.1}] for {n} distinct points",
            cfg.perplexity,
            n as f64 / 3.0
        )));
    }
    let lr = cfg
        .learning_rate
        .unwrap_or((n as f64 / (4.0 * cfg.exaggeration)).max(50.0));
    let (cond, _) = conditional_affinities(x, cfg.perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(1e-12);
        }
        p[i * n + i] = 0.0;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut vel = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0; 2]; n];
    let mut qn = vec![0.0; n * n];
    let mut grad = vec![[0.0; 2]; n];
    let mut history = Vec::new();
    for it in 0..cfg.iterations {
        let exag = if it < cfg.exaggeration_iters { cfg.exaggeration } else { 1.0 };
        let momentum = if it < cfg.exaggeration_iters { 0.5 } else { 0.8 };
        let mut q_sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let d = (y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2);
                let v = 1.0 / (1.0 + d);
                qn[i * n + j] = v;
                qn[j * n + i] = v;
                q_sum += 2.0 * v;
            }
        }
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let w = qn[i * n + j];
                let m = (exag * p[i * n + j] - w / q_sum) * w;
                g[0] += m * (y[i][0] - y[j][0]);
                g[1] += m * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }
        for i in 0..n {
            for a in 0..2 {
                let same = (grad[i][a] > 0.0) == (vel[i][a] > 0.0);
                gains[i][a] = if same { (gains[i][a] * 0.8f64).max(0.01) } else { gains[i][a] + 0.2 };
                vel[i][a] = momentum * vel[i][a] - lr * gains[i][a] * grad[i][a];
                y[i][a] += vel[i][a];
            }
        }
        let mean = [
            y.iter().map(|p| p[0]).sum::<f64>() / n as f64,
            y.iter().map(|p| p[1]).sum::<f64>() / n as f64,
        ];
        for p in &mut y {
            p[0] -= mean[0];
            p[1] -= mean[1];
        }
        if (it + 1) % 50 == 0 || it + 1 == cfg.iterations {
            history.push((it + 1, kl_divergence(&p, &qn, q_sum)));
        }
    }
    if y.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::Numeric {
            message: "t-SNE diverged".into(),
            residual: f64::NAN,
        });
    }
    Ok(Embedding2D {
        coords: y,
        method: EmbedMethod::Tsne,
        seed: cfg.seed,
        kl_history: history,
    })
}

/// Principal axes of a point cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit directions, by descending variance.
    pub components: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn fit(x: &[Vec<f64>], n_components: usize) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::validation("PCA needs at least one point"));
        }
        let d = x[0].len();
        let n = x.len() as f64;
        let mean: Vec<f64> = (0..d).map(|k| x.iter().map(|p| p[k]).sum::<f64>() / n).collect();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for p in x {
            for a in 0..d {
                let da = p[a] - mean[a];
                for b in a..d {
                    cov[(a, b)] += da * (p[b] - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] /= n;
                cov[(b, a)] = cov[(a, b)];
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let mut components = Vec::new();
        let mut variances = Vec::new();
        for &k in order.iter().take(n_components.min(d)) {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            // sign convention: largest-magnitude entry positive
            let big = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
            if big < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
            components.push(v);
            variances.push(eig.eigenvalues[k].max(0.0));
        }
        Ok(Self {
            mean,
            components,
            variances,
        })
    }

    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(p).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect()
    }
}

pub fn pca_2d(x: &[Vec<f64>]) -> Result<Embedding2D> {
    let pca = Pca::fit(x, 2)?;
    let coords = x
        .iter()
        .map(|p| {
            let v = pca.project(p);
            [v.first().copied().unwrap_or(0.0), v.get(1).copied().unwrap_or(0.0)]
        })
        .collect();
    Ok(Embedding2D {
        coords,
        method: EmbedMethod::Pca,
        seed: 0,
        kl_history: Vec::new(),
    })
}

/// One row of the embedding table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub id: String,
    pub u: f64,
    pub v: f64,
    pub cluster: usize,
    pub frequency: f64,
}

pub fn write_embedding_csv(path: &Path, rows: &[EmbeddingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_embedding_csv(path: &Path) -> Result<Vec<EmbeddingRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
