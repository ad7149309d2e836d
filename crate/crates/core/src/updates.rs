//! One- and two-dimensional row and column steps.
//!
//! Row steps move `x` onto the hyperplane(s) `A^{(i)}x = rhs_i`; column steps
//! project `z` onto the orthogonal complement of one or two columns. All
//! functions update in place and report the coefficients they applied, so a
//! caller can patch maintained residual vectors from the same numbers.

use thiserror::Error;

use crate::linalg::{Matrix, NormCache, VecView};
use crate::selection::Axis;

/// Pairs with `1 − μ² ≤ PARALLEL_TOL` take the one-dimensional fallback.
pub const PARALLEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UpdateError {
    #[error("{axis:?} {index} has zero norm")]
    ZeroNorm { axis: Axis, index: usize },
    #[error("pair is parallel; use the one-dimensional fallback")]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    /// `⟨v₁, v₂⟩ / (‖v₁‖‖v₂‖)`
    pub mu: f64,
    /// `1 − μ²`
    pub u_norm_sq: f64,
    /// `‖v₁‖²‖v₂‖² − ⟨v₁, v₂⟩²`
    pub denom: f64,
    pub inner: f64,
    pub parallel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoDimCoeffs {
    pub gamma: f64,
    pub lambda: f64,
}

/// What a step actually applied: `Δ = coef·v_index` or `Δ = γ·v₁ + λ·v₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Applied {
    One { index: usize, coef: f64 },
    Two { first: usize, second: usize, coeffs: TwoDimCoeffs },
}

impl Applied {
    /// `(index, coefficient)` terms of the applied combination.
    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> {
        let (a, b) = match *self {
            Applied::One { index, coef } => ((index, coef), None),
            Applied::Two { first, second, coeffs } => {
                ((first, coeffs.gamma), Some((second, coeffs.lambda)))
            }
        };
        std::iter::once(a).chain(b)
    }

    pub fn is_two_dim(&self) -> bool {
        matches!(self, Applied::Two { .. })
    }
}

fn checked_norm(norms: &[f64], index: usize, axis: Axis) -> Result<f64, UpdateError> {
    let n = norms[index];
    if n > 0.0 {
        Ok(n)
    } else {
        Err(UpdateError::ZeroNorm { axis, index })
    }
}

/// `x ← x + (rhs_i − A^{(i)}x)/‖A^{(i)}‖² · A^{(i)ᵀ}`.
pub fn row_update_1d(
    x: &mut [f64],
    a: &Matrix,
    cache: &NormCache,
    i: usize,
    rhs_i: f64,
) -> Result<Applied, UpdateError> {
    let nsq = checked_norm(&cache.row_sq_norms, i, Axis::Row)?;
    let row = a.row(i);
    let coef = (rhs_i - row.dot(x)) / nsq;
    row.axpy(coef, x);
    Ok(Applied::One { index: i, coef })
}

/// `z ← z − (A_{(j)}ᵀz)/‖A_{(j)}‖² · A_{(j)}`.
pub fn col_project_1d(
    z: &mut [f64],
    a: &Matrix,
    cache: &NormCache,
    j: usize,
) -> Result<Applied, UpdateError> {
    let nsq = checked_norm(&cache.col_sq_norms, j, Axis::Column)?;
    let col = a.col(j);
    let coef = -col.dot(z) / nsq;
    col.axpy(coef, z);
    Ok(Applied::One { index: j, coef })
}

pub fn pair_geometry(
    v1: &VecView<'_>,
    v2: &VecView<'_>,
    norms_sq: (f64, f64),
) -> Result<PairGeometry, UpdateError> {
    let (n1, n2) = norms_sq;
    if !(n1 > 0.0) || !(n2 > 0.0) {
        return Err(UpdateError::ZeroNorm {
            axis: Axis::Row,
            index: usize::from(n1 > 0.0),
        });
    }
    let inner = v1.dot_view(v2);
    let mu = inner / (n1.sqrt() * n2.sqrt());
    let u_norm_sq = 1.0 - mu * mu;
    Ok(PairGeometry {
        mu,
        u_norm_sq,
        denom: n1 * n2 - inner * inner,
        inner,
        parallel: u_norm_sq <= PARALLEL_TOL,
    })
}

fn row_geometry(a: &Matrix, cache: &NormCache, i1: usize, i2: usize) -> Result<PairGeometry, UpdateError> {
    let n1 = checked_norm(&cache.row_sq_norms, i1, Axis::Row)?;
    let n2 = checked_norm(&cache.row_sq_norms, i2, Axis::Row)?;
    pair_geometry(&a.row(i1), &a.row(i2), (n1, n2))
}

fn col_geometry(a: &Matrix, cache: &NormCache, j1: usize, j2: usize) -> Result<PairGeometry, UpdateError> {
    let n1 = checked_norm(&cache.col_sq_norms, j1, Axis::Column)?;
    let n2 = checked_norm(&cache.col_sq_norms, j2, Axis::Column)?;
    pair_geometry(&a.col(j1), &a.col(j2), (n1, n2))
}

/// `γ = (‖A^{(i₂)}‖²r₁ − c·r₂)/denom`, `λ = (‖A^{(i₁)}‖²r₂ − c·r₁)/denom`
/// with `c = ⟨A^{(i₁)}, A^{(i₂)}⟩`.
pub fn two_dim_row_coeffs(
    a: &Matrix,
    cache: &NormCache,
    i1: usize,
    i2: usize,
    r1: f64,
    r2: f64,
) -> Result<TwoDimCoeffs, UpdateError> {
    let g = row_geometry(a, cache, i1, i2)?;
    if g.parallel {
        return Err(UpdateError::Parallel);
    }
    let (n1, n2) = (cache.row_sq_norms[i1], cache.row_sq_norms[i2]);
    Ok(TwoDimCoeffs {
        gamma: (n2 * r1 - g.inner * r2) / g.denom,
        lambda: (n1 * r2 - g.inner * r1) / g.denom,
    })
}

/// `x ← x + γA^{(i₁)ᵀ} + λA^{(i₂)ᵀ}`, zeroing the residuals at both rows.
///
/// `r₁`, `r₂` are the current residuals `rhs − A^{(i)}x` at the two rows. A
/// parallel pair falls back to the one-dimensional step at `i₁`.
pub fn two_dim_row_update(
    x: &mut [f64],
    a: &Matrix,
    cache: &NormCache,
    i1: usize,
    i2: usize,
    r1: f64,
    r2: f64,
) -> Result<Applied, UpdateError> {
    match two_dim_row_coeffs(a, cache, i1, i2, r1, r2) {
        Ok(coeffs) => {
            a.row(i1).axpy(coeffs.gamma, x);
            a.row(i2).axpy(coeffs.lambda, x);
            Ok(Applied::Two {
                first: i1,
                second: i2,
                coeffs,
            })
        }
        Err(UpdateError::Parallel) => {
            let coef = r1 / cache.row_sq_norms[i1];
            a.row(i1).axpy(coef, x);
            Ok(Applied::One { index: i1, coef })
        }
        Err(e) => Err(e),
    }
}

/// `γ̃ = (c·p₂ − ‖A_{(j₂)}‖²p₁)/denom`, `λ̃ = (c·p₁ − ‖A_{(j₁)}‖²p₂)/denom`
/// with `p = A_{(j)}ᵀz` and `c = ⟨A_{(j₁)}, A_{(j₂)}⟩`.
pub fn two_dim_col_coeffs(
    a: &Matrix,
    cache: &NormCache,
    j1: usize,
    j2: usize,
    z: &[f64],
) -> Result<TwoDimCoeffs, UpdateError> {
    let g = col_geometry(a, cache, j1, j2)?;
    if g.parallel {
        return Err(UpdateError::Parallel);
    }
    let (n1, n2) = (cache.col_sq_norms[j1], cache.col_sq_norms[j2]);
    let p1 = a.col(j1).dot(z);
    let p2 = a.col(j2).dot(z);
    Ok(TwoDimCoeffs {
        gamma: (g.inner * p2 - n2 * p1) / g.denom,
        lambda: (g.inner * p1 - n1 * p2) / g.denom,
    })
}

/// `z ← z + γ̃A_{(j₁)} + λ̃A_{(j₂)}`, orthogonal to both columns afterwards.
pub fn two_dim_col_update(
    z: &mut [f64],
    a: &Matrix,
    cache: &NormCache,
    j1: usize,
    j2: usize,
) -> Result<Applied, UpdateError> {
    match two_dim_col_coeffs(a, cache, j1, j2, z) {
        Ok(coeffs) => {
            a.col(j1).axpy(coeffs.gamma, z);
            a.col(j2).axpy(coeffs.lambda, z);
            Ok(Applied::Two {
                first: j1,
                second: j2,
                coeffs,
            })
        }
        Err(UpdateError::Parallel) => col_project_1d(z, a, cache, j1),
        Err(e) => Err(e),
    }
}
