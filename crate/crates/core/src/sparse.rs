//! Compressed-row sparse matrices and the SPD solve used by the
//! Gauss-Newton family. Factorization is delegated to faer's supernodal
//! Cholesky; the symbolic analysis is cached per sparsity pattern so that
//! repeated solves on the same stencil only pay for the numeric phase.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Side};

use crate::error::{PgdmError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            order.clear();
            order.extend(counts[r]..counts[r + 1]);
            order.sort_unstable_by_key(|&k| cols[k]);
            for &k in &order {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == cols[k] {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `A^T y`.
    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                out[c] += v * yr;
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                col_idx[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// `A^T A` with sorted column indices.
    pub fn normal_matrix(&self) -> SparseMatrix {
        let at = self.transpose();
        let n = self.ncols;
        let mut acc = vec![0.0; n];
        let mut marker = vec![usize::MAX; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for a in 0..n {
            touched.clear();
            for (i, v_ia) in at.row(a) {
                for (b, v_ib) in self.row(i) {
                    if marker[b] != a {
                        marker[b] = a;
                        acc[b] = 0.0;
                        touched.push(b);
                    }
                    acc[b] += v_ia * v_ib;
                }
            }
            touched.sort_unstable();
            for &b in &touched {
                col_idx.push(b);
                values.push(acc[b]);
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|r| {
                self.row(r)
                    .find(|&(c, _)| c == r)
                    .map_or(0.0, |(_, v)| v)
            })
            .collect()
    }

    /// Adds `d[i]` to each diagonal entry; the diagonal must be structurally present.
    pub fn add_to_diagonal(&mut self, d: &[f64]) -> Result<()> {
        for (r, &dr) in d.iter().enumerate() {
            let range = self.row_ptr[r]..self.row_ptr[r + 1];
            let pos = self.col_idx[range.clone()]
                .binary_search(&r)
                .map_err(|_| PgdmError::Numerical(format!("row {r} has no diagonal entry")))?;
            self.values[range.start + pos] += dr;
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        out
    }
}

/// Cholesky solver for symmetric positive definite [`SparseMatrix`] systems.
#[derive(Default)]
pub struct SpdSolver {
    cached: Option<(Vec<usize>, Vec<usize>, SymbolicLlt<usize>)>,
}

impl SpdSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let n = a.nrows;
        if a.ncols != n || b.len() != n {
            return Err(PgdmError::invalid("SPD solve needs a square system"));
        }
        // CSR of a symmetric matrix doubles as its CSC.
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, &a.row_ptr, None, &a.col_idx);
        let reuse = matches!(&self.cached, Some((p, c, _)) if *p == a.row_ptr && *c == a.col_idx);
        if !reuse {
            let symbolic = SymbolicLlt::try_new(pattern, Side::Lower)
                .map_err(|e| PgdmError::Numerical(format!("symbolic Cholesky failed: {e:?}")))?;
            self.cached = Some((a.row_ptr.clone(), a.col_idx.clone(), symbolic));
        }
        let symbolic = self.cached.as_ref().unwrap().2.clone();
        let llt = Llt::try_new_with_symbolic(
            symbolic,
            SparseColMatRef::new(pattern, &a.values),
            Side::Lower,
        )
        .map_err(|e| PgdmError::Numerical(format!("Cholesky factorization failed: {e:?}")))?;
        let mut rhs = Mat::from_fn(n, 1, |i, _| b[i]);
        llt.solve_in_place(rhs.as_mut());
        let x: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PgdmError::Numerical("non-finite solution of normal equations".into()));
        }
        Ok(x)
    }
}
