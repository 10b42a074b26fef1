use super::domain::{ElementKind, WheelDomain};
use super::element::q4_stiffness;
use crate::error::{Error, Result};
use crate::linalg::CholeskyPattern;

const NONE: usize = usize::MAX;

/// Displacements, loads and compliance of one static solve.
#[derive(Clone, Debug)]
pub struct FemState2D {
    /// Full nodal displacement vector (fixed DOFs are zero).
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub compliance: f64,
    /// `u_eᵀ k₀ u_e` per element with unit modulus (zero for void elements).
    pub element_energy: Vec<f64>,
    /// `‖K U − F‖ / ‖F‖` on the free DOFs.
    pub residual: f64,
}

/// Reusable assembly plan: free-DOF numbering and the symbolic factorization.
#[derive(Clone, Debug)]
pub struct Fem2d {
    ke: [[f64; 8]; 8],
    elements: Vec<usize>,
    free_index: Vec<usize>,
    n_free: usize,
    pattern: Option<CholeskyPattern>,
}

impl Fem2d {
    pub fn new(domain: &WheelDomain, nu: f64) -> Result<Self> {
        let elements: Vec<usize> = (0..domain.n_elements())
            .filter(|&e| domain.kinds()[e] != ElementKind::Void)
            .collect();
        if !domain.fixed().iter().any(|&f| f) {
            return Err(Error::Structural(
                "no fixed degrees of freedom; stiffness matrix is singular".into(),
            ));
        }
        let mut active = vec![false; domain.n_dofs()];
        for &e in &elements {
            for d in domain.element_dofs(e) {
                active[d] = true;
            }
        }
        let mut free_index = vec![NONE; domain.n_dofs()];
        let mut n_free = 0;
        for d in 0..domain.n_dofs() {
            if active[d] && !domain.fixed()[d] {
                free_index[d] = n_free;
                n_free += 1;
            }
        }
        let mut fem = Self {
            ke: q4_stiffness(nu),
            elements,
            free_index,
            n_free,
            pattern: None,
        };
        if n_free > 0 {
            let mut pairs = Vec::new();
            fem.for_each_entry(domain, |r, c, _, _| pairs.push((r, c)));
            fem.pattern = Some(CholeskyPattern::from_lower_pairs(n_free, &pairs)?);
        }
        Ok(fem)
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// Visits lower-triangle entries `(row, col, element, (i, j))` in a fixed order.
    fn for_each_entry(&self, domain: &WheelDomain, mut f: impl FnMut(usize, usize, usize, (usize, usize))) {
        for &e in &self.elements {
            let dofs = domain.element_dofs(e).map(|d| self.free_index[d]);
            for i in 0..8 {
                if dofs[i] == NONE {
                    continue;
                }
                for j in 0..8 {
                    if dofs[j] != NONE && dofs[i] >= dofs[j] {
                        f(dofs[i], dofs[j], e, (i, j));
                    }
                }
            }
        }
    }

    /// Solves `K(E) U = F` for per-element Young's moduli `young`.
    pub fn solve(&self, domain: &WheelDomain, young: &[f64]) -> Result<FemState2D> {
        if young.len() != domain.n_elements() {
            return Err(Error::dimension(domain.n_elements(), young.len()));
        }
        let ndof = domain.n_dofs();
        let f = domain.loads().to_vec();
        let mut u = vec![0.0; ndof];
        let mut residual = 0.0;
        if let Some(pattern) = &self.pattern {
            let mut values = Vec::with_capacity(pattern.value_count());
            self.for_each_entry(domain, |_, _, e, (i, j)| values.push(young[e] * self.ke[i][j]));
            let chol = pattern.factorize(&values)?;
            let mut rhs = vec![0.0; self.n_free];
            for d in 0..ndof {
                if self.free_index[d] != NONE {
                    rhs[self.free_index[d]] = f[d];
                }
            }
            let mut x = rhs.clone();
            chol.solve_in_place(&mut x);
            for d in 0..ndof {
                if self.free_index[d] != NONE {
                    u[d] = x[self.free_index[d]];
                }
            }
            residual = self.relative_residual(domain, young, &u, &rhs);
            if !residual.is_finite() || residual > 1e-6 {
                return Err(Error::Numeric {
                    message: "linear solve did not reach tolerance".into(),
                    residual,
                });
            }
        }
        let mut element_energy = vec![0.0; domain.n_elements()];
        for &e in &self.elements {
            let ue = domain.element_dofs(e).map(|d| u[d]);
            element_energy[e] = quad(&self.ke, &ue);
        }
        let compliance = f.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        Ok(FemState2D {
            u,
            f,
            compliance,
            element_energy,
            residual,
        })
    }

    fn relative_residual(&self, domain: &WheelDomain, young: &[f64], u: &[f64], rhs: &[f64]) -> f64 {
        let mut ku = vec![0.0; self.n_free];
        for &e in &self.elements {
            let dofs = domain.element_dofs(e);
            for i in 0..8 {
                let fi = self.free_index[dofs[i]];
                if fi == NONE {
                    continue;
                }
                let s: f64 = (0..8).map(|j| self.ke[i][j] * u[dofs[j]]).sum();
                ku[fi] += young[e] * s;
            }
        }
        let num: f64 = ku.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den: f64 = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

fn quad(k: &[[f64; 8]; 8], u: &[f64; 8]) -> f64 {
    let mut acc = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            acc += u[i] * k[i][j] * u[j];
        }
    }
    acc
}

/// SIMP modulus `E_min + x^p (E_0 − E_min)`.
pub fn simp_modulus(x: f64, penal: f64, e0: f64, emin: f64) -> f64 {
    emin + x.powf(penal) * (e0 - emin)
}

/// One-shot assembly and solve at physical densities `xbar`.
pub fn assemble_and_solve(
    domain: &WheelDomain,
    xbar: &[f64],
    penal: f64,
    e0: f64,
    emin: f64,
    nu: f64,
) -> Result<FemState2D> {
    let fem = Fem2d::new(domain, nu)?;
    let young: Vec<f64> = xbar.iter().map(|&x| simp_modulus(x, penal, e0, emin)).collect();
    fem.solve(domain, &young)
}
