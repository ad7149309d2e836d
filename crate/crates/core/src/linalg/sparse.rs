use super::LinalgError;

/// Sparse matrix stored twice: row-compressed and column-compressed.
///
/// Both views hold the same `(i, j, v)` triples. Indices are strictly
/// increasing inside every row and every column.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    col_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
}

impl DualSparseMatrix {
    /// Builds both views from unordered triples. Duplicate positions are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut entries = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= rows {
                return Err(LinalgError::IndexOutOfRange {
                    axis: "row",
                    index: i,
                    len: rows,
                });
            }
            if j >= cols {
                return Err(LinalgError::IndexOutOfRange {
                    axis: "column",
                    index: j,
                    len: cols,
                });
            }
            if !v.is_finite() {
                return Err(LinalgError::NonFinite { row: i, col: j });
            }
            entries.push((i, j, v));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }

        let mut row_ptr = vec![0usize; rows + 1];
        for &(i, _, _) in &merged {
            row_ptr[i + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let row_idx = merged.iter().map(|e| e.1).collect();
        let row_val = merged.iter().map(|e| e.2).collect();

        let mut col_ptr = vec![0usize; cols + 1];
        for &(_, j, _) in &merged {
            col_ptr[j + 1] += 1;
        }
        for j in 0..cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut next = col_ptr.clone();
        let mut col_idx = vec![0usize; merged.len()];
        let mut col_val = vec![0.0; merged.len()];
        // merged is row-major, so row indices land in increasing order per column
        for &(i, j, v) in &merged {
            let p = next[j];
            col_idx[p] = i;
            col_val[p] = v;
            next[j] += 1;
        }

        Ok(Self {
            rows,
            cols,
            row_ptr,
            row_idx,
            row_val,
            col_ptr,
            col_idx,
            col_val,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.row_val.len()
    }

    pub fn row_parts(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.row_idx[s..e], &self.row_val[s..e])
    }

    pub fn col_parts(&self, j: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.col_idx[s..e], &self.col_val[s..e])
    }

    /// Row-major triples.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            let (idx, val) = self.row_parts(i);
            out.extend(idx.iter().zip(val).map(|(&j, &v)| (i, j, v)));
        }
        out
    }

    /// Column-major triples, read from the column view.
    pub fn triplets_by_col(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.cols {
            let (idx, val) = self.col_parts(j);
            out.extend(idx.iter().zip(val).map(|(&i, &v)| (i, j, v)));
        }
        out
    }
}
