use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of one k-means run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sse: f64,
    /// SSE after each assignment step.
    pub sse_history: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn check_points(x: &[Vec<f64>], k: usize) -> Result<()> {
    if k == 0 || k > x.len() {
        return Err(Error::validation(format!("k = {k} must be in [1, {}]", x.len())));
    }
    let d = x[0].len();
    if x.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::validation("points must share one dimension and be finite"));
    }
    Ok(())
}

/// k-means++ seeding.
fn seed_centroids(x: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut cents = vec![x[rng.random_range(0..x.len())].clone()];
    let mut d: Vec<f64> = x.iter().map(|p| dist2(p, &cents[0])).collect();
    while cents.len() < k {
        let total: f64 = d.iter().sum();
        let idx = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = d.iter().rposition(|&v| v > 0.0).unwrap_or(0);
            for (i, &v) in d.iter().enumerate() {
                if r < v {
                    pick = i;
                    break;
                }
                r -= v;
            }
            pick
        } else {
            rng.random_range(0..x.len())
        };
        cents.push(x[idx].clone());
        for (di, p) in d.iter_mut().zip(x) {
            *di = di.min(dist2(p, &cents[cents.len() - 1]));
        }
    }
    cents
}

fn assign(x: &[Vec<f64>], cents: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut sse = 0.0;
    let labels = x
        .iter()
        .map(|p| {
            let (mut best, mut bd) = (0, f64::INFINITY);
            for (c, cent) in cents.iter().enumerate() {
                let d = dist2(p, cent);
                if d < bd {
                    (best, bd) = (c, d);
                }
            }
            sse += bd;
            best
        })
        .collect();
    (labels, sse)
}

/// Lloyd iterations from given centroids until assignments stop changing.
pub fn lloyd(x: &[Vec<f64>], mut cents: Vec<Vec<f64>>, max_iter: usize) -> Result<ClusterAssignment> {
    check_points(x, cents.len())?;
    let k = cents.len();
    let dim = x[0].len();
    let (mut labels, mut sse) = assign(x, &cents);
    let mut history = vec![sse];
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in x.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            // an empty cluster keeps its centroid
            if counts[c] > 0 {
                cents[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let (next, next_sse) = assign(x, &cents);
        if next_sse > sse * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Numeric {
                message: "k-means SSE increased".into(),
                residual: next_sse - sse,
            });
        }
        history.push(next_sse);
        let done = next == labels;
        (labels, sse) = (next, next_sse);
        if done {
            break;
        }
    }
    Ok(ClusterAssignment {
        labels,
        centroids: cents,
        sse,
        sse_history: history,
    })
}

/// k-means with k-means++ seeding; deterministic for a seed.
pub fn kmeans(x: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment> {
    check_points(x, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lloyd(x, seed_centroids(x, k, &mut rng), max_iter)
}

/// Best-of-`restarts` SSE for each k in `ks` (ascending). Each k also tries the
/// previous k's centroids plus the point farthest from them, so the curve never rises.
pub fn elbow_curve(x: &[Vec<f64>], ks: &[usize], seed: u64, restarts: usize) -> Result<Vec<(usize, f64)>> {
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("k values must be strictly ascending"));
    }
    let mut out = Vec::with_capacity(ks.len());
    let mut prev: Option<ClusterAssignment> = None;
    for &k in ks {
        let mut best: Option<ClusterAssignment> = None;
        for r in 0..restarts.max(1) {
            let a = kmeans(x, k, seed.wrapping_add(1000 * k as u64 + r as u64), 300)?;
            if best.as_ref().is_none_or(|b| a.sse < b.sse) {
                best = Some(a);
            }
        }
        if let Some(p) = &prev {
            let mut cents = p.centroids.clone();
            while cents.len() < k {
                let far = x
                    .iter()
                    .max_by(|a, b| {
                        let da = cents.iter().map(|c| dist2(a, c)).fold(f64::INFINITY, f64::min);
                        let db = cents.iter().map(|c| dist2(b, c)).fold(f64::INFINITY, f64::min);
                        da.total_cmp(&db)
                    })
                    .expect("non-empty");
                cents.push(far.clone());
            }
            let a = lloyd(x, cents, 300)?;
            if best.as_ref().is_none_or(|b| a.sse < b.sse) {
                best = Some(a);
            }
        }
        let b = best.expect("at least one run");
        out.push((k, b.sse));
        prev = Some(b);
    }
    Ok(out)
}

/// The k with the largest second difference of SSE (interior points only).
pub fn elbow_k(curve: &[(usize, f64)]) -> Option<usize> {
    curve
        .windows(3)
        .map(|w| (w[1].0, w[0].1 - 2.0 * w[1].1 + w[2].1))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
}

/// One-dimensional k-means groups ordered by ascending centroid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGroups {
    pub labels: Vec<usize>,
    pub centroids: Vec<f64>,
    /// `[min, max]` of the members of each group.
    pub ranges: Vec<[f64; 2]>,
}

pub fn frequency_groups(freqs: &[f64], k: usize, seed: u64) -> Result<FrequencyGroups> {
    let x: Vec<Vec<f64>> = freqs.iter().map(|&f| vec![f]).collect();
    let mut best: Option<ClusterAssignment> = None;
    for r in 0..5 {
        let a = kmeans(&x, k, seed.wrapping_add(r), 500)?;
        if best.as_ref().is_none_or(|b| a.sse < b.sse) {
            best = Some(a);
        }
    }
    let a = best.expect("five runs");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| a.centroids[i][0].total_cmp(&a.centroids[j][0]));
    let mut rank = vec![0; k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    let labels: Vec<usize> = a.labels.iter().map(|&l| rank[l]).collect();
    let mut ranges = vec![[f64::INFINITY, f64::NEG_INFINITY]; k];
    for (&l, &f) in labels.iter().zip(freqs) {
        ranges[l][0] = ranges[l][0].min(f);
        ranges[l][1] = ranges[l][1].max(f);
    }
    let used: Vec<&[f64; 2]> = ranges.iter().filter(|r| r[0] <= r[1]).collect();
    if used.windows(2).any(|w| w[0][1] >= w[1][0]) {
        return Err(Error::Numeric {
            message: "one-dimensional groups interleave".into(),
            residual: 0.0,
        });
    }
    Ok(FrequencyGroups {
        labels,
        centroids: order.iter().map(|&c| a.centroids[c][0]).collect(),
        ranges,
    })
}
