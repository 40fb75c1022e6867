//! Compressed sparse row matrices and the operator abstraction the Krylov
//! solvers run against.

use crate::error::{Error, Result};

/// Something that can be applied to a vector. The solvers only ever need
/// `y = A x`.
pub trait LinearOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// CSR sparse matrix.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseOperator {
    /// Builds from (row, col, value) triplets. Duplicates are summed so the
    /// stored matrix has unique entries per (row, col).
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> SparseOperator {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows: Vec<usize> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in &triplets {
            debug_assert!(r < nrows && c < ncols);
            if rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[idx] == r {
                    d[r] += self.values[idx];
                }
            }
        }
        d
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[idx] * x[self.col_idx[idx]];
            }
            y[r] = acc;
        }
    }

    /// y = A^T x
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.nrows {
            let xv = x[r];
            if xv == 0.0 {
                continue;
            }
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[idx]] += self.values[idx] * xv;
            }
        }
    }

    pub fn to_dense(&self) -> crate::dense::DenseMatrix {
        let mut m = crate::dense::DenseMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                *m.at_mut(r, self.col_idx[idx]) += self.values[idx];
            }
        }
        m
    }

    /// Checks structural sanity: sorted unique columns per row, finite values.
    pub fn validate(&self) -> Result<()> {
        for r in 0..self.nrows {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            for idx in lo..hi {
                if !self.values[idx].is_finite() {
                    return Err(Error::SingularSystem {
                        detail: format!("non-finite entry at row {r}"),
                    });
                }
                if idx > lo && self.col_idx[idx] <= self.col_idx[idx - 1] {
                    return Err(Error::SingularSystem {
                        detail: format!("unsorted or duplicate column in row {r}"),
                    });
                }
            }
        }
        Ok(())
    }
}

impl LinearOp for SparseOperator {
    fn dim(&self) -> usize {
        self.nrows
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }
}

/// Square matrix bordered by a single mean constraint:
/// `[[A, w*1], [w*1^T, 0]]`. Realizes the zero-mean augmentation of the
/// pure-Neumann scalar systems without pinning a cell.
pub struct BorderedOperator<'a> {
    pub inner: &'a SparseOperator,
    /// scale of the border entries, chosen near the diagonal magnitude
    pub weight: f64,
}

impl<'a> BorderedOperator<'a> {
    pub fn new(inner: &'a SparseOperator) -> BorderedOperator<'a> {
        let d = inner.diagonal();
        let n = inner.nrows.max(1);
        let mean_diag = d.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        BorderedOperator {
            inner,
            weight: if mean_diag > 0.0 {
                mean_diag / (n as f64).sqrt()
            } else {
                1.0
            },
        }
    }
}

impl LinearOp for BorderedOperator<'_> {
    fn dim(&self) -> usize {
        self.inner.nrows + 1
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.inner.nrows;
        self.inner.matvec(&x[..n], &mut y[..n]);
        let mu = x[n];
        let mut s = 0.0;
        for i in 0..n {
            y[i] += self.weight * mu;
            s += x[i];
        }
        y[n] = self.weight * s;
    }
}
