//! Matrix storage with equally cheap row and column access, vector kernels,
//! and a dense direct oracle for ground truth.

mod dense;
mod oracle;
mod sparse;

pub use dense::DenseMatrix;
pub use oracle::{
    direct_least_squares, direct_least_squares_capped, gram_extreme_eigenvalues,
    gram_extreme_eigenvalues_capped, row_space_projector, OracleCap,
};
pub use sparse::DualSparseMatrix;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("{axis} index {index} out of range (len {len})")]
    IndexOutOfRange {
        axis: &'static str,
        index: usize,
        len: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix {rows}x{cols} exceeds the direct oracle cap {max_rows}x{max_cols}")]
    OracleTooLarge {
        rows: usize,
        cols: usize,
        max_rows: usize,
        max_cols: usize,
    },
    #[error("empty matrix")]
    Empty,
}

/// A read-only view of one row or one column.
#[derive(Debug, Clone, Copy)]
pub enum VecView<'a> {
    Contiguous(&'a [f64]),
    Strided {
        data: &'a [f64],
        offset: usize,
        stride: usize,
        len: usize,
    },
    Sparse {
        indices: &'a [usize],
        values: &'a [f64],
        len: usize,
    },
}

impl<'a> VecView<'a> {
    pub fn len(&self) -> usize {
        match *self {
            VecView::Contiguous(s) => s.len(),
            VecView::Strided { len, .. } | VecView::Sparse { len, .. } => len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, k: usize) -> f64 {
        match *self {
            VecView::Contiguous(s) => s[k],
            VecView::Strided {
                data,
                offset,
                stride,
                ..
            } => data[offset + k * stride],
            VecView::Sparse {
                indices, values, ..
            } => indices
                .binary_search(&k)
                .map_or(0.0, |p| values[p]),
        }
    }

    /// Stored entries as `(index, value)`; dense views yield every position.
    pub fn entries(&self) -> Entries<'a> {
        Entries { view: *self, pos: 0 }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (k, v) in self.entries() {
            out[k] = v;
        }
        out
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        match *self {
            VecView::Contiguous(s) => s.iter().zip(x).map(|(a, b)| a * b).sum(),
            VecView::Strided {
                data,
                offset,
                stride,
                len,
            } => (0..len).map(|k| data[offset + k * stride] * x[k]).sum(),
            VecView::Sparse {
                indices, values, ..
            } => indices.iter().zip(values).map(|(&k, v)| v * x[k]).sum(),
        }
    }

    /// `y += alpha · self`
    pub fn axpy(&self, alpha: f64, y: &mut [f64]) {
        match *self {
            VecView::Contiguous(s) => {
                for (yk, a) in y.iter_mut().zip(s) {
                    *yk += alpha * a;
                }
            }
            VecView::Strided {
                data,
                offset,
                stride,
                len,
            } => {
                for (k, yk) in y.iter_mut().enumerate().take(len) {
                    *yk += alpha * data[offset + k * stride];
                }
            }
            VecView::Sparse {
                indices, values, ..
            } => {
                for (&k, v) in indices.iter().zip(values) {
                    y[k] += alpha * v;
                }
            }
        }
    }

    /// Inner product of two views of the same length.
    pub fn dot_view(&self, other: &VecView<'_>) -> f64 {
        match (self, other) {
            (
                VecView::Sparse {
                    indices: ia,
                    values: va,
                    ..
                },
                VecView::Sparse {
                    indices: ib,
                    values: vb,
                    ..
                },
            ) => {
                let (mut p, mut q, mut acc) = (0, 0, 0.0);
                while p < ia.len() && q < ib.len() {
                    match ia[p].cmp(&ib[q]) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            acc += va[p] * vb[q];
                            p += 1;
                            q += 1;
                        }
                    }
                }
                acc
            }
            (VecView::Sparse { .. }, _) => self.entries().map(|(k, v)| v * other.get(k)).sum(),
            _ => other.entries().map(|(k, v)| v * self.get(k)).sum(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries().map(|(_, v)| v * v).sum()
    }
}

pub struct Entries<'a> {
    view: VecView<'a>,
    pos: usize,
}

impl Iterator for Entries<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let p = self.pos;
        let item = match self.view {
            VecView::Contiguous(s) => s.get(p).map(|&v| (p, v)),
            VecView::Strided {
                data,
                offset,
                stride,
                len,
            } => (p < len).then(|| (p, data[offset + p * stride])),
            VecView::Sparse {
                indices, values, ..
            } => indices.get(p).map(|&k| (k, values[p])),
        };
        self.pos += 1;
        item
    }
}

/// Either storage; every solver is written against this type.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(DenseMatrix),
    Sparse(DualSparseMatrix),
}

impl From<DenseMatrix> for Matrix {
    fn from(m: DenseMatrix) -> Self {
        Matrix::Dense(m)
    }
}

impl From<DualSparseMatrix> for Matrix {
    fn from(m: DualSparseMatrix) -> Self {
        Matrix::Sparse(m)
    }
}

impl Matrix {
    pub fn rows(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.rows(),
            Matrix::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.cols(),
            Matrix::Sparse(s) => s.cols(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn nnz(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.values().len(),
            Matrix::Sparse(s) => s.nnz(),
        }
    }

    /// Row `i` without copying.
    pub fn row_view(&self, i: usize) -> Result<VecView<'_>, LinalgError> {
        if i >= self.rows() {
            return Err(LinalgError::IndexOutOfRange {
                axis: "row",
                index: i,
                len: self.rows(),
            });
        }
        Ok(self.row(i))
    }

    /// Column `j`; sparse matrices read the column-compressed copy.
    pub fn col_view(&self, j: usize) -> Result<VecView<'_>, LinalgError> {
        if j >= self.cols() {
            return Err(LinalgError::IndexOutOfRange {
                axis: "column",
                index: j,
                len: self.cols(),
            });
        }
        Ok(self.col(j))
    }

    /// Unchecked row access for inner loops. Panics when out of range.
    pub fn row(&self, i: usize) -> VecView<'_> {
        match self {
            Matrix::Dense(d) => VecView::Contiguous(d.row(i)),
            Matrix::Sparse(s) => {
                let (indices, values) = s.row_parts(i);
                VecView::Sparse {
                    indices,
                    values,
                    len: s.cols(),
                }
            }
        }
    }

    /// Unchecked column access for inner loops. Panics when out of range.
    pub fn col(&self, j: usize) -> VecView<'_> {
        match self {
            Matrix::Dense(d) => {
                assert!(j < d.cols());
                VecView::Strided {
                    data: d.values(),
                    offset: j,
                    stride: d.cols(),
                    len: d.rows(),
                }
            }
            Matrix::Sparse(s) => {
                let (indices, values) = s.col_parts(j);
                VecView::Sparse {
                    indices,
                    values,
                    len: s.rows(),
                }
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).get(j)
    }

    /// `A x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows()).map(|i| self.row(i).dot(x)).collect()
    }

    /// `Aᵀ z`
    pub fn matvec_t(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Matrix::Dense(d) => {
                let mut out = vec![0.0; d.cols()];
                for (i, &zi) in z.iter().enumerate() {
                    if zi != 0.0 {
                        for (o, a) in out.iter_mut().zip(d.row(i)) {
                            *o += zi * a;
                        }
                    }
                }
                out
            }
            Matrix::Sparse(_) => (0..self.cols()).map(|j| self.col(j).dot(z)).collect(),
        }
    }

    /// Stored triples in row-major order (all entries for dense storage).
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        match self {
            Matrix::Dense(d) => {
                let mut out = Vec::with_capacity(d.values().len());
                for i in 0..d.rows() {
                    out.extend(d.row(i).iter().enumerate().map(|(j, &v)| (i, j, v)));
                }
                out
            }
            Matrix::Sparse(s) => s.triplets(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Matrix::Dense(d) => d.clone(),
            Matrix::Sparse(s) => {
                let mut values = vec![0.0; s.rows() * s.cols()];
                for (i, j, v) in s.triplets() {
                    values[i * s.cols() + j] = v;
                }
                DenseMatrix::new(s.rows(), s.cols(), values).expect("finite entries")
            }
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.triplets().iter().map(|t| t.2 * t.2).sum()
    }
}

/// Squared row and column norms plus `‖A‖_F²`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormCache {
    pub row_sq_norms: Vec<f64>,
    pub col_sq_norms: Vec<f64>,
    pub frob_sq: f64,
}

impl NormCache {
    pub fn frob(&self) -> f64 {
        self.frob_sq.sqrt()
    }
}

pub fn build_norm_cache(a: &Matrix) -> Result<NormCache, LinalgError> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(LinalgError::Empty);
    }
    let row_sq_norms: Vec<f64> = (0..m).map(|i| a.row(i).norm_sq()).collect();
    let col_sq_norms: Vec<f64> = match a {
        Matrix::Dense(d) => {
            let mut c = vec![0.0; n];
            for i in 0..m {
                for (cj, v) in c.iter_mut().zip(d.row(i)) {
                    *cj += v * v;
                }
            }
            c
        }
        Matrix::Sparse(_) => (0..n).map(|j| a.col(j).norm_sq()).collect(),
    };
    let frob_sq = row_sq_norms.iter().sum();
    Ok(NormCache {
        row_sq_norms,
        col_sq_norms,
        frob_sq,
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
