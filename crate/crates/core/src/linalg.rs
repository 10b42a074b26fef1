//! Sparse symmetric positive-definite factorization shared by the 2D and 3D solvers.
//!
//! Thin wrapper over faer's supernodal Cholesky: the symbolic analysis is done
//! once per sparsity pattern and reused for every numeric factorization.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Side};

use crate::error::{Error, Result};

/// A fixed lower-triangular sparsity pattern with its symbolic factorization.
#[derive(Clone, Debug)]
pub struct CholeskyPattern {
    n: usize,
    structure: SymbolicSparseColMat<usize>,
    symbolic: SymbolicLlt<usize>,
    argsort: Option<Argsort<usize>>,
    nnz: usize,
}

fn symbolic_error(e: impl std::fmt::Debug) -> Error {
    Error::Structural(format!("sparse pattern rejected: {e:?}"))
}

impl CholeskyPattern {
    /// Pattern from `(row, col)` pairs with `row >= col`; duplicates are summed
    /// when values are supplied to [`CholeskyPattern::factorize`] in pair order.
    pub fn from_lower_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        debug_assert!(pairs.iter().all(|&(r, c)| r >= c && r < n));
        let idx: Vec<Pair<usize, usize>> = pairs.iter().map(|&(r, c)| Pair::new(r, c)).collect();
        let (structure, argsort) =
            SymbolicSparseColMat::try_new_from_indices(n, n, &idx).map_err(symbolic_error)?;
        let symbolic =
            SymbolicLlt::try_new(structure.as_ref(), Side::Lower).map_err(symbolic_error)?;
        Ok(Self {
            n,
            structure,
            symbolic,
            argsort: Some(argsort),
            nnz: pairs.len(),
        })
    }

    /// Pattern from a sorted lower-triangular CSC structure; values are then
    /// supplied in CSC order.
    pub fn from_lower_csc(n: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>) -> Result<Self> {
        let nnz = row_idx.len();
        let structure = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let symbolic =
            SymbolicLlt::try_new(structure.as_ref(), Side::Lower).map_err(symbolic_error)?;
        Ok(Self {
            n,
            structure,
            symbolic,
            argsort: None,
            nnz,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of values expected by [`CholeskyPattern::factorize`].
    pub fn value_count(&self) -> usize {
        self.nnz
    }

    pub fn factorize(&self, values: &[f64]) -> Result<Cholesky> {
        if values.len() != self.nnz {
            return Err(Error::dimension(self.nnz, values.len()));
        }
        let mat = match &self.argsort {
            Some(argsort) => SparseColMat::new_from_argsort(self.structure.clone(), argsort, values)
                .map_err(symbolic_error)?,
            None => SparseColMat::new(self.structure.clone(), values.to_vec()),
        };
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), mat.as_ref(), Side::Lower)
            .map_err(|e| Error::Numeric {
                message: format!("Cholesky factorization failed ({e:?}); matrix is not positive definite"),
                residual: f64::NAN,
            })?;
        Ok(Cholesky { n: self.n, llt })
    }
}

/// Numeric Cholesky factor of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    llt: Llt<usize, f64>,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.n);
        let mat = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.llt.solve_in_place(mat);
    }

    /// Solves for `cols` right-hand sides stored column-major in `rhs`.
    pub fn solve_columns(&self, rhs: &mut [f64], cols: usize) {
        assert_eq!(rhs.len(), self.n * cols);
        let mat = MatMut::from_column_major_slice_mut(rhs, self.n, cols);
        self.llt.solve_in_place(mat);
    }
}

/// Symmetric sparse matrix stored with both triangles in CSR form (for products).
#[derive(Clone, Debug, Default)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.col_idx[k] == i)
                    .map_or(0.0, |k| self.values[k])
            })
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
