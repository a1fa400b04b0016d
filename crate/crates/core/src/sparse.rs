//! Minimal complex CSR matrix for the sector operators.
//!
//! Dense operands are column-major slices, matching `nalgebra::DMatrix`.

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    /// Builds row by row; `row(r)` yields the (column, value) pairs of row `r`.
    pub(crate) fn from_rows<I, F>(nrows: usize, ncols: usize, mut row: F) -> Self
    where
        F: FnMut(usize) -> I,
        I: IntoIterator<Item = (usize, C64)>,
    {
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..nrows {
            for (c, v) in row(r) {
                debug_assert!(c < ncols);
                if v != C64::new(0.0, 0.0) {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    #[cfg(test)]
    pub(crate) fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[cfg(test)]
    pub(crate) fn to_dense(&self) -> nalgebra::DMatrix<C64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    /// out (nrows × n) += alpha · A · x, with x of shape (ncols × n).
    pub(crate) fn mul_dense_acc(&self, x: &[C64], n: usize, out: &mut [C64], alpha: C64) {
        debug_assert_eq!(x.len(), self.ncols * n);
        debug_assert_eq!(out.len(), self.nrows * n);
        for (xc, oc) in x.chunks_exact(self.ncols).zip(out.chunks_exact_mut(self.nrows)) {
            for (r, o) in oc.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[k] * xc[self.cols[k]];
                }
                *o += alpha * acc;
            }
        }
    }

    /// out (m × nrows) += alpha · x · A†, with x of shape (m × ncols).
    pub(crate) fn dense_mul_adjoint_acc(&self, x: &[C64], m: usize, out: &mut [C64], alpha: C64) {
        debug_assert_eq!(x.len(), m * self.ncols);
        debug_assert_eq!(out.len(), m * self.nrows);
        for (r, oc) in out.chunks_exact_mut(m).enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let w = alpha * self.vals[k].conj();
                let xc = &x[self.cols[k] * m..(self.cols[k] + 1) * m];
                for (o, v) in oc.iter_mut().zip(xc) {
                    *o += w * v;
                }
            }
        }
    }
}
