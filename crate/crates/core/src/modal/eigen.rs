//! Shift-invert block Krylov eigensolver for the pencil `K φ = λ M φ`.
//!
//! The basis is grown with `(K − σM)⁻¹ M`, kept M-orthonormal, and the Ritz
//! pairs come from the projection of `K` itself.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assemble::{lower_pattern, Assembled};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::nn::gemm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenSettings {
    pub n_modes: usize,
    pub block: usize,
    /// Shift frequency; σ = −(2π·shift_hz)².
    pub shift_hz: f64,
    /// Relative residual tolerance for every requested pair.
    pub tol: f64,
    /// Basis size cap; `None` picks `6 * n_modes + 6 * block`.
    pub max_basis: Option<usize>,
    pub seed: u64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            n_modes: 15,
            block: 6,
            shift_hz: 50.0,
            tol: 1e-6,
            max_basis: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPairs {
    /// Eigenvalues λ = ω², ascending.
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors, one row per pair.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub basis_size: usize,
    pub sigma: f64,
}

struct Basis {
    n: usize,
    v: Vec<f64>,
    mv: Vec<f64>,
    kv: Vec<f64>,
}

impl Basis {
    fn len(&self) -> usize {
        self.v.len() / self.n
    }

    fn row<'a>(buf: &'a [f64], n: usize, i: usize) -> &'a [f64] {
        &buf[i * n..(i + 1) * n]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// M-orthogonalizes the rows of `w` against the basis and each other and
/// appends the survivors; returns how many were added.
fn extend(basis: &mut Basis, mut w: Vec<f64>, k: &CsrMatrix, m: &CsrMatrix) -> usize {
    let n = basis.n;
    let rows = w.len() / n;
    let mut tmp = vec![0.0; n];
    let norms0: Vec<f64> = (0..rows)
        .map(|r| {
            m.mul_vec(&w[r * n..(r + 1) * n], &mut tmp);
            dot(&w[r * n..(r + 1) * n], &tmp).max(0.0).sqrt()
        })
        .collect();
    let mut added = 0;
    for _ in 0..2 {
        let b = basis.len();
        if b > 0 {
            let mut c = vec![0.0; b * rows];
            gemm(b, n, rows, 1.0, &basis.mv, false, &w, true, 0.0, &mut c);
            gemm(rows, b, n, -1.0, &c, true, &basis.v, false, 1.0, &mut w);
        }
    }
    for r in 0..rows {
        let mut x = w[r * n..(r + 1) * n].to_vec();
        // Against vectors accepted earlier from this block.
        for _ in 0..2 {
            let b0 = basis.len() - added;
            for i in b0..basis.len() {
                let c = dot(Basis::row(&basis.mv, n, i), &x);
                for (xv, vv) in x.iter_mut().zip(Basis::row(&basis.v, n, i)) {
                    *xv -= c * vv;
                }
            }
        }
        let mut mx = vec![0.0; n];
        m.mul_vec(&x, &mut mx);
        let nrm = dot(&x, &mx).max(0.0).sqrt();
        if !(nrm > 1e-10 * norms0[r]) || nrm == 0.0 {
            continue;
        }
        let inv = 1.0 / nrm;
        x.iter_mut().for_each(|v| *v *= inv);
        mx.iter_mut().for_each(|v| *v *= inv);
        let mut kx = vec![0.0; n];
        k.mul_vec(&x, &mut kx);
        basis.v.extend_from_slice(&x);
        basis.mv.extend_from_slice(&mx);
        basis.kv.extend_from_slice(&kx);
        added += 1;
    }
    added
}

fn random_block(rng: &mut ChaCha8Rng, rows: usize, n: usize) -> Vec<f64> {
    (0..rows * n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Lowest `n_modes` eigenpairs of a free (possibly singular) `K` with SPD `M`.
pub fn solve_pencil(asm: &Assembled, s: &EigenSettings) -> Result<EigenPairs> {
    let n = asm.k.n;
    if s.n_modes == 0 || s.block == 0 {
        return Err(Error::validation("n_modes and block must be positive"));
    }
    if s.n_modes > n {
        return Err(Error::validation(format!("requested {} modes from {n} DOFs", s.n_modes)));
    }
    let sigma = -(2.0 * std::f64::consts::PI * s.shift_hz).powi(2);
    let (pattern, src) = lower_pattern(&asm.k)?;
    let shifted: Vec<f64> = src.iter().map(|&p| asm.k.values[p] - sigma * asm.m.values[p]).collect();
    let chol = pattern.factorize(&shifted).map_err(|e| Error::Numeric {
        message: format!("{e}; try a larger shift_hz (currently {})", s.shift_hz),
        residual: f64::NAN,
    })?;

    let k_norm = (0..n)
        .map(|r| (asm.k.row_ptr[r]..asm.k.row_ptr[r + 1]).map(|p| asm.k.values[p].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let max_basis = s.max_basis.unwrap_or(6 * s.n_modes + 6 * s.block).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut basis = Basis {
        n,
        v: Vec::new(),
        mv: Vec::new(),
        kv: Vec::new(),
    };
    let mut a: Vec<f64> = Vec::new(); // projected K, row-major, grown in place
    let mut a_dim = 0;
    let mut last_start = 0;
    let added = extend(&mut basis, random_block(&mut rng, s.block.min(n), n), &asm.k, &asm.m);
    let mut last_len = added;
    let mut since_check = 0;
    loop {
        // Grow the projection to cover the whole basis.
        let b = basis.len();
        if b > a_dim {
            let mut na = vec![0.0; b * b];
            for i in 0..a_dim {
                na[i * b..i * b + a_dim].copy_from_slice(&a[i * a_dim..(i + 1) * a_dim]);
            }
            let new = b - a_dim;
            let mut c = vec![0.0; b * new];
            gemm(b, n, new, 1.0, &basis.v, false, &basis.kv[a_dim * n..], true, 0.0, &mut c);
            for i in 0..b {
                for j in 0..new {
                    na[i * b + a_dim + j] = c[i * new + j];
                }
            }
            for i in a_dim..b {
                for j in 0..b {
                    if j < a_dim {
                        na[i * b + j] = na[j * b + i];
                    } else if j > i {
                        let x = 0.5 * (na[i * b + j] + na[j * b + i]);
                        na[i * b + j] = x;
                        na[j * b + i] = x;
                    }
                }
            }
            a = na;
            a_dim = b;
        }
        let full = b >= n;
        let ready = b >= 2 * s.n_modes + s.block || full;
        since_check += 1;
        if ready && (since_check >= 2 || full || b >= max_basis) {
            since_check = 0;
            if let Some(pairs) = ritz(&basis, &a, b, s, sigma, k_norm, full || b >= max_basis)? {
                return Ok(pairs);
            }
        }
        if full {
            unreachable!("a full basis always converges");
        }
        // Next block: (K − σM)⁻¹ M applied to the previous block.
        let rows = last_len.max(1);
        let mut w = if last_len == 0 {
            random_block(&mut rng, s.block.min(n - b), n)
        } else {
            let mut w = basis.mv[last_start * n..(last_start + rows) * n].to_vec();
            // Column-major solve: rows of `w` are exactly the columns.
            chol.solve_columns(&mut w, rows);
            w
        };
        if b + w.len() / n > max_basis {
            w.truncate((max_basis - b) * n);
        }
        last_start = b;
        last_len = extend(&mut basis, w, &asm.k, &asm.m);
        if last_len == 0 && basis.len() < n {
            // Invariant subspace: restart the Krylov sequence from fresh vectors.
            let fresh = random_block(&mut rng, s.block.min(n - basis.len()), n);
            last_start = basis.len();
            last_len = extend(&mut basis, fresh, &asm.k, &asm.m);
        }
    }
}

fn ritz(
    basis: &Basis,
    a: &[f64],
    b: usize,
    s: &EigenSettings,
    sigma: f64,
    k_norm: f64,
    last_chance: bool,
) -> Result<Option<EigenPairs>> {
    let n = basis.n;
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(b, b, a));
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let want = s.n_modes;
    // Y has one row per wanted pair.
    let mut y = vec![0.0; want * b];
    for (r, &i) in order.iter().take(want).enumerate() {
        for j in 0..b {
            y[r * b + j] = eig.eigenvectors[(j, i)];
        }
    }
    let mut phi = vec![0.0; want * n];
    let mut kphi = vec![0.0; want * n];
    let mut mphi = vec![0.0; want * n];
    gemm(want, b, n, 1.0, &y, false, &basis.v, false, 0.0, &mut phi);
    gemm(want, b, n, 1.0, &y, false, &basis.kv, false, 0.0, &mut kphi);
    gemm(want, b, n, 1.0, &y, false, &basis.mv, false, 0.0, &mut mphi);
    let values: Vec<f64> = order.iter().take(want).map(|&i| eig.eigenvalues[i]).collect();
    let residuals: Vec<f64> = (0..want)
        .map(|r| {
            let (kp, mp) = (&kphi[r * n..(r + 1) * n], &mphi[r * n..(r + 1) * n]);
            let res: f64 = kp.iter().zip(mp).map(|(k, m)| (k - values[r] * m).powi(2)).sum::<f64>().sqrt();
            let scale = (values[r].abs() + sigma.abs()) * mp.iter().map(|v| v * v).sum::<f64>().sqrt();
            // Round-off floor for near-null (rigid) pairs.
            let phi_norm = phi[r * n..(r + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt();
            let floor = 1e3 * f64::EPSILON * k_norm * phi_norm;
            (res - floor).max(0.0) / scale
        })
        .collect();
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    if worst > s.tol && !(last_chance && b >= n) {
        if last_chance {
            return Err(Error::Numeric {
                message: format!("eigensolver did not converge with a basis of {b}; raise max_basis"),
                residual: worst,
            });
        }
        return Ok(None);
    }
    Ok(Some(EigenPairs {
        values,
        vectors: phi.chunks(n).map(|c| c.to_vec()).collect(),
        residuals,
        basis_size: b,
        sigma,
    }))
}
