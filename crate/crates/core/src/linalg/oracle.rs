//! Dense direct solves used as ground truth. Desk scale only.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{LinalgError, Matrix};

/// Size limit for the dense oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCap {
    pub max_rows: usize,
    pub max_cols: usize,
}

impl Default for OracleCap {
    fn default() -> Self {
        Self {
            max_rows: 5000,
            max_cols: 2000,
        }
    }
}

impl OracleCap {
    fn check(&self, a: &Matrix) -> Result<(), LinalgError> {
        let (m, n) = a.shape();
        if m == 0 || n == 0 {
            return Err(LinalgError::Empty);
        }
        // the cap is symmetric in orientation: under-determined systems use the transpose bound
        let (big, small) = (m.max(n), m.min(n));
        if big > self.max_rows || small > self.max_cols {
            return Err(LinalgError::OracleTooLarge {
                rows: m,
                cols: n,
                max_rows: self.max_rows,
                max_cols: self.max_cols,
            });
        }
        Ok(())
    }
}

fn to_nalgebra(a: &Matrix) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let mut out = DMatrix::zeros(m, n);
    for (i, j, v) in a.triplets() {
        out[(i, j)] = v;
    }
    out
}

fn rank_tol(sigma_max: f64, m: usize, n: usize) -> f64 {
    sigma_max * (m.max(n) as f64) * f64::EPSILON
}

/// Minimum-norm least-squares solution `A†b` through a truncated SVD.
pub fn direct_least_squares(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    direct_least_squares_capped(a, b, OracleCap::default())
}

pub fn direct_least_squares_capped(
    a: &Matrix,
    b: &[f64],
    cap: OracleCap,
) -> Result<Vec<f64>, LinalgError> {
    cap.check(a)?;
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(LinalgError::DimensionMismatch {
            expected: m,
            found: b.len(),
        });
    }
    let svd = to_nalgebra(a).svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let eps = rank_tol(smax, m, n);
    let rhs = DVector::from_column_slice(b);
    let x = svd.solve(&rhs, eps).expect("both factors were requested");
    Ok(x.iter().copied().collect())
}

/// Smallest nonzero and largest eigenvalue of `AᵀA`.
///
/// The eigenproblem is solved on whichever Gram matrix (`AᵀA` or `AAᵀ`) is
/// smaller; their nonzero spectra coincide. Eigenvalues at or below
/// `1e-12 · λ_max` count as zero.
pub fn gram_extreme_eigenvalues(a: &Matrix) -> Result<(f64, f64), LinalgError> {
    gram_extreme_eigenvalues_capped(a, OracleCap::default())
}

pub fn gram_extreme_eigenvalues_capped(
    a: &Matrix,
    cap: OracleCap,
) -> Result<(f64, f64), LinalgError> {
    cap.check(a)?;
    let dense = to_nalgebra(a);
    let gram = if a.cols() <= a.rows() {
        dense.transpose() * &dense
    } else {
        &dense * dense.transpose()
    };
    let eig = SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    if lmax == 0.0 {
        return Ok((0.0, 0.0));
    }
    let lmin = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > 1e-12 * lmax)
        .fold(f64::INFINITY, f64::min);
    Ok((lmin, lmax))
}

/// Orthonormal basis of the row space `ℛ(Aᵀ)`.
#[derive(Debug, Clone)]
pub struct RowSpaceProjector {
    basis: Vec<Vec<f64>>,
}

impl RowSpaceProjector {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for q in &self.basis {
            let c: f64 = q.iter().zip(v).map(|(a, b)| a * b).sum();
            for (o, qk) in out.iter_mut().zip(q) {
                *o += c * qk;
            }
        }
        out
    }
}

pub fn row_space_projector(a: &Matrix) -> Result<RowSpaceProjector, LinalgError> {
    OracleCap::default().check(a)?;
    let (m, n) = a.shape();
    let svd = to_nalgebra(a).svd(false, true);
    let smax = svd.singular_values.max();
    let tol = rank_tol(smax, m, n);
    let v_t = svd.v_t.expect("requested");
    let basis = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol)
        .map(|(k, _)| v_t.row(k).iter().copied().collect())
        .collect();
    Ok(RowSpaceProjector { basis })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{build_norm_cache, DenseMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..m * n).map(|_| StandardNormal.sample(&mut rng)).collect();
        DenseMatrix::new(m, n, v).unwrap()
    }

    fn normal_eq_residual(a: &Matrix, b: &[f64], x: &[f64]) -> f64 {
        let ax = a.matvec(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        crate::linalg::norm(&a.matvec_t(&r))
    }

    #[test]
    fn small_least_squares() {
        let i2: Matrix = DenseMatrix::identity(2).into();
        let x = direct_least_squares(&i2, &[1.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        let col: Matrix = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap().into();
        let x = direct_least_squares(&col, &[0.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn recovers_known_solution_with_orthogonal_noise() {
        let a: Matrix = gaussian(20, 5, 11).into();
        let ones = vec![1.0; 5];
        // r := g − A A†g is orthogonal to ℛ(A)
        let g: Vec<f64> = gaussian(20, 1, 12).values().to_vec();
        let xp = direct_least_squares(&a, &g).unwrap();
        let ap = a.matvec(&xp);
        let r: Vec<f64> = g.iter().zip(&ap).map(|(p, q)| p - q).collect();
        assert!(crate::linalg::norm(&a.matvec_t(&r)) < 1e-12 * crate::linalg::norm(&r) * 20.0);
        let b: Vec<f64> = a.matvec(&ones).iter().zip(&r).map(|(p, q)| p + q).collect();
        let x = direct_least_squares(&a, &b).unwrap();
        let err: f64 = x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-8, "err = {err}");
    }

    #[test]
    fn normal_equations_hold_for_rank_deficient() {
        // third column duplicates the first, fourth is zero
        let base = gaussian(12, 2, 3);
        let mut rows = Vec::new();
        for i in 0..12 {
            let r = base.row(i);
            rows.push(vec![r[0], r[1], r[0], 0.0]);
        }
        let a: Matrix = DenseMatrix::from_rows(&rows).unwrap().into();
        let b = gaussian(12, 1, 4).values().to_vec();
        let x = direct_least_squares(&a, &b).unwrap();
        let c = build_norm_cache(&a).unwrap();
        let bound = 1e-10 * c.frob() * crate::linalg::norm(&b);
        assert!(normal_eq_residual(&a, &b, &x) <= bound);
        // minimum norm: equal weight on the duplicated columns, nothing on the zero one
        assert!((x[0] - x[2]).abs() < 1e-12);
        assert!(x[3].abs() < 1e-14);
    }

    #[test]
    fn underdetermined_min_norm() {
        let a: Matrix = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap().into();
        let x = direct_least_squares(&a, &[2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_cap() {
        let a: Matrix = DenseMatrix::zeros(10, 3).into();
        let cap = OracleCap {
            max_rows: 5,
            max_cols: 5,
        };
        assert!(matches!(
            direct_least_squares_capped(&a, &[0.0; 10], cap),
            Err(LinalgError::OracleTooLarge { .. })
        ));
        assert!(gram_extreme_eigenvalues_capped(&a, cap).is_err());
    }

    #[test]
    fn extreme_eigenvalues() {
        let (lo, hi) = gram_extreme_eigenvalues(&DenseMatrix::diag(&[1.0, 2.0]).into()).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 4.0).abs() < 1e-13);
        let (lo, hi) = gram_extreme_eigenvalues(&DenseMatrix::identity(3).into()).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
        let rank1: Matrix = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]])
            .unwrap()
            .into();
        let (lo, hi) = gram_extreme_eigenvalues(&rank1).unwrap();
        assert!((lo - 2.0).abs() < 1e-14 && (hi - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rayleigh_bounds_on_row_space() {
        let a: Matrix = gaussian(15, 6, 21).into();
        let wide: Matrix = gaussian(4, 9, 22).into();
        for (a, seed) in [(a, 30u64), (wide, 31)] {
            let (lo, hi) = gram_extreme_eigenvalues(&a).unwrap();
            let proj = row_space_projector(&a).unwrap();
            for s in 0..20 {
                let v = gaussian(a.cols(), 1, seed * 100 + s).values().to_vec();
                let v = proj.project(&v);
                let vv = crate::linalg::norm_sq(&v);
                let av = crate::linalg::norm_sq(&a.matvec(&v));
                assert!(lo * vv <= av * (1.0 + 1e-10));
                assert!(av <= hi * vv * (1.0 + 1e-10));
            }
        }
    }

    #[test]
    fn eigenvalues_match_singular_values() {
        let a: Matrix = gaussian(10, 4, 8).into();
        let (lo, hi) = gram_extreme_eigenvalues(&a).unwrap();
        let sv = to_nalgebra(&a).singular_values();
        let smax = sv.max();
        let smin = sv.min();
        assert!((hi - smax * smax).abs() <= 1e-10 * hi);
        assert!((lo - smin * smin).abs() <= 1e-10 * hi);
    }
}
