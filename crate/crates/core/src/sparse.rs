//! Compressed sparse row matrix for node features.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Columns within a
    /// row are sorted; repeated columns are summed; explicit zeros are kept.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for mut row in rows.into_iter() {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if c >= cols {
                    return Err(Error::DimensionMismatch {
                        what: "sparse column index bound",
                        expected: cols,
                        got: c,
                    });
                }
                if indices.len() > *offsets.last().unwrap() && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Ok(Self {
            rows: offsets.len() - 1,
            cols,
            offsets,
            indices,
            values,
        })
    }

    pub fn from_dense(dense: ArrayView2<'_, f64>) -> Self {
        let rows = dense
            .outer_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self::from_rows(dense.ncols(), rows).expect("dense columns are in range")
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs stored in `row`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[row]..self.offsets[row + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[[r, c]] = v;
            }
        }
        out
    }

    /// `self · rhs`.
    pub fn dot_dense(&self, rhs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if rhs.nrows() != self.cols {
            return Err(Error::DimensionMismatch {
                what: "sparse product inner dimension",
                expected: self.cols,
                got: rhs.nrows(),
            });
        }
        let mut out = Array2::zeros((self.rows, rhs.ncols()));
        for (r, mut out_row) in out.outer_iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                out_row.scaled_add(v, &rhs.row(c));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs`.
    pub fn t_dot_dense(&self, rhs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if rhs.nrows() != self.rows {
            return Err(Error::DimensionMismatch {
                what: "sparse transposed product inner dimension",
                expected: self.rows,
                got: rhs.nrows(),
            });
        }
        let mut out = Array2::zeros((self.cols, rhs.ncols()));
        for r in 0..self.rows {
            let src = rhs.row(r);
            for (c, v) in self.row(r) {
                out.row_mut(c).scaled_add(v, &src);
            }
        }
        Ok(out)
    }
}
