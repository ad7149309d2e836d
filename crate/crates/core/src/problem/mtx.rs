//! Matrix Market (`.mtx`) reader and writer: coordinate and array layouts,
//! real/integer fields, general and symmetric storage.

use std::fmt::Write as _;
use std::path::Path;

use super::ProblemError;
use crate::linalg::{DenseMatrix, DualSparseMatrix, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<Matrix, ProblemError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_matrix_market_str(&text, &path.display().to_string())
}

/// Parses Matrix Market text; `origin` labels error messages.
pub fn read_matrix_market_str(text: &str, origin: &str) -> Result<Matrix, ProblemError> {
    let err = |line: usize, msg: String| ProblemError::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(hline, format!("malformed header `{header}`")));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(err(hline, format!("unsupported layout `{other}`"))),
    };
    match tokens[3].as_str() {
        "real" | "double" | "integer" => {}
        other => return Err(err(hline, format!("unsupported field `{other}` (real only)"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(err(hline, format!("unsupported symmetry `{other}`"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sline, size) = body.next().ok_or_else(|| err(hline, "missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| err(sline, format!("bad size line: {e}")))?;

    let parse_f = |line: usize, t: &str| -> Result<f64, ProblemError> {
        let v: f64 = t
            .parse()
            .map_err(|e| err(line, format!("bad value `{t}`: {e}")))?;
        if !v.is_finite() {
            return Err(err(line, format!("non-finite value `{t}`")));
        }
        Ok(v)
    };

    match layout {
        Layout::Coordinate => {
            let [m, n, nnz] = dims[..] else {
                return Err(err(sline, "coordinate size line needs `rows cols nnz`".into()));
            };
            if symmetry == Symmetry::Symmetric && m != n {
                return Err(err(sline, "symmetric matrix must be square".into()));
            }
            let mut triplets = Vec::with_capacity(nnz * 2);
            let mut seen = 0usize;
            for (line, l) in body {
                let parts: Vec<&str> = l.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(err(line, format!("expected `i j value`, got `{l}`")));
                }
                let idx = |t: &str, bound: usize, what: &str| -> Result<usize, ProblemError> {
                    let k: usize = t
                        .parse()
                        .map_err(|e| err(line, format!("bad {what} index `{t}`: {e}")))?;
                    if k == 0 || k > bound {
                        return Err(err(line, format!("{what} index {k} out of range 1..={bound}")));
                    }
                    Ok(k - 1)
                };
                let i = idx(parts[0], m, "row")?;
                let j = idx(parts[1], n, "column")?;
                let v = parse_f(line, parts[2])?;
                triplets.push((i, j, v));
                if symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((j, i, v));
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(err(sline, format!("declared {nnz} entries, found {seen}")));
            }
            Ok(DualSparseMatrix::from_triplets(m, n, &triplets)?.into())
        }
        Layout::Array => {
            let [m, n] = dims[..] else {
                return Err(err(sline, "array size line needs `rows cols`".into()));
            };
            if symmetry == Symmetry::Symmetric && m != n {
                return Err(err(sline, "symmetric matrix must be square".into()));
            }
            let mut values = vec![0.0; m * n];
            // column-major; symmetric stores the lower triangle only
            let positions: Vec<(usize, usize)> = match symmetry {
                Symmetry::General => (0..n).flat_map(|j| (0..m).map(move |i| (i, j))).collect(),
                Symmetry::Symmetric => (0..n).flat_map(|j| (j..m).map(move |i| (i, j))).collect(),
            };
            let mut pos = positions.iter();
            let mut last_line = sline;
            for (line, l) in body {
                last_line = line;
                for t in l.split_whitespace() {
                    let &(i, j) = pos
                        .next()
                        .ok_or_else(|| err(line, "more values than the size line allows".into()))?;
                    let v = parse_f(line, t)?;
                    values[i * n + j] = v;
                    if symmetry == Symmetry::Symmetric {
                        values[j * n + i] = v;
                    }
                }
            }
            if pos.next().is_some() {
                return Err(err(last_line, "fewer values than the size line declares".into()));
            }
            Ok(DenseMatrix::new(m, n, values)?.into())
        }
    }
}

/// Writes `a` as `coordinate real general` with 17 significant digits.
pub fn write_matrix_market(a: &Matrix, path: impl AsRef<Path>) -> Result<(), ProblemError> {
    let path = path.as_ref();
    std::fs::write(path, to_matrix_market_string(a)).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn to_matrix_market_string(a: &Matrix) -> String {
    let triplets = a.triplets();
    let mut out = String::with_capacity(32 * (triplets.len() + 2));
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.rows(), a.cols(), triplets.len());
    for (i, j, v) in triplets {
        let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v);
    }
    out
}
