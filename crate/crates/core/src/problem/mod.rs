//! Least-squares problem instances: Gaussian and tomography generators,
//! controlled-inconsistency right-hand sides, Matrix Market I/O and on-disk
//! problem bundles.

mod bundle;
mod mtx;
mod tomo;

pub use bundle::{load_bundle, save_bundle, BundleMeta};
pub use mtx::{read_matrix_market, read_matrix_market_str, write_matrix_market};
pub use tomo::{
    gen_parallel_beam, parallel_beam_matrix, shepp_logan, shepp_logan_value, BeamGeometry,
};

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{
    self, build_norm_cache, direct_least_squares, DenseMatrix, LinalgError, Matrix,
};
use crate::rng;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("problem invariant violated: {0}")]
    Invariant(String),
}

/// A least-squares instance `min ‖b − Ax‖₂`.
#[derive(Debug, Clone)]
pub struct LsProblem {
    pub a: Matrix,
    pub b: Vec<f64>,
    /// Least-norm solution `A†b`, when known.
    pub x_star: Option<Vec<f64>>,
    /// The injected component of `b` in `ℛ(A)^⊥`, when known.
    pub r: Option<Vec<f64>>,
    pub label: String,
}

impl LsProblem {
    pub fn new(a: Matrix, b: Vec<f64>, label: impl Into<String>) -> Result<Self, ProblemError> {
        if b.len() != a.rows() {
            return Err(LinalgError::DimensionMismatch {
                expected: a.rows(),
                found: b.len(),
            }
            .into());
        }
        Ok(Self {
            a,
            b,
            x_star: None,
            r: None,
            label: label.into(),
        })
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    /// Is the system consistent by construction (`r` known and zero)?
    pub fn is_consistent(&self) -> bool {
        self.r.as_ref().is_some_and(|r| r.iter().all(|&v| v == 0.0))
    }

    /// Checks `‖b − A x⋆ − r‖ ≤ 1e-10‖b‖` and `‖Aᵀr‖ ≤ 1e-8‖A‖_F‖r‖` when both are known.
    pub fn check_invariants(&self) -> Result<(), ProblemError> {
        let (m, n) = self.a.shape();
        if self.b.len() != m {
            return Err(ProblemError::Invariant(format!(
                "b has length {}, expected {m}",
                self.b.len()
            )));
        }
        if let Some(x) = &self.x_star {
            if x.len() != n {
                return Err(ProblemError::Invariant("x_star length".into()));
            }
        }
        if let Some(r) = &self.r {
            if r.len() != m {
                return Err(ProblemError::Invariant("r length".into()));
            }
            let frob = build_norm_cache(&self.a)?.frob();
            let rn = linalg::norm(r);
            let at_r = linalg::norm(&self.a.matvec_t(r));
            if at_r > 1e-8 * frob * rn {
                return Err(ProblemError::Invariant(format!(
                    "‖Aᵀr‖ = {at_r:e} exceeds 1e-8·‖A‖_F·‖r‖ = {:e}",
                    1e-8 * frob * rn
                )));
            }
        }
        if let (Some(x), Some(r)) = (&self.x_star, &self.r) {
            let ax = self.a.matvec(x);
            let gap: f64 = self
                .b
                .iter()
                .zip(&ax)
                .zip(r)
                .map(|((b, ax), r)| (b - ax - r).powi(2))
                .sum::<f64>()
                .sqrt();
            let bn = linalg::norm(&self.b);
            if gap > 1e-10 * bn {
                return Err(ProblemError::Invariant(format!(
                    "‖b − A x⋆ − r‖ = {gap:e} exceeds 1e-10·‖b‖"
                )));
            }
        }
        Ok(())
    }

    /// `b_{ℛ(A)^⊥}`: the stored `r` when present, otherwise from the oracle.
    pub fn b_perp(&self) -> Result<Vec<f64>, ProblemError> {
        match &self.r {
            Some(r) => Ok(r.clone()),
            None => Ok(range_split(&self.a, &self.b)?.b_perp),
        }
    }
}

/// Orthogonal split `b = b_{ℛ(A)} + b_{ℛ(A)^⊥}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSplit {
    pub b_range: Vec<f64>,
    pub b_perp: Vec<f64>,
}

pub fn range_split(a: &Matrix, b: &[f64]) -> Result<RangeSplit, ProblemError> {
    let x = direct_least_squares(a, b)?;
    let b_range = a.matvec(&x);
    let b_perp = b.iter().zip(&b_range).map(|(p, q)| p - q).collect();
    Ok(RangeSplit { b_range, b_perp })
}

pub fn gaussian_vector(len: usize, rng: &mut rng::SolverRng) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// `m × n` matrix of i.i.d. standard normals.
///
/// Entries are drawn row-major from the ChaCha8 stream seeded with `seed`,
/// through `rand_distr::StandardNormal` (ziggurat).
pub fn gen_gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = rng::stream(seed);
    DenseMatrix::new(m, n, gaussian_vector(m * n, &mut rng)).expect("normals are finite")
}

/// Projects `v` onto `ℛ(A)^⊥`: `v − A A†v`.
fn project_out_range(a: &Matrix, v: &[f64]) -> Result<Vec<f64>, ProblemError> {
    let xp = direct_least_squares(a, v)?;
    let ap = a.matvec(&xp);
    Ok(v.iter().zip(&ap).map(|(p, q)| p - q).collect())
}

/// Inconsistent instance `b = A x⋆ + r` with `r ∈ ℛ(A)^⊥`.
///
/// `r` comes from projecting a Gaussian draw (`r = r̃ − A A†r̃`), with one
/// extra projection pass when the first leaves `‖Aᵀr‖` above tolerance.
/// The stored `x⋆` is the oracle least-norm solution `A†b`, not the raw draw.
pub fn make_inconsistent_problem(a: impl Into<Matrix>, seed: u64) -> Result<LsProblem, ProblemError> {
    let a = a.into();
    let (m, n) = a.shape();
    let mut rng = rng::stream(rng::derive_seed(seed, &["inconsistent-rhs"]));
    let x_draw = gaussian_vector(n, &mut rng);
    let r_draw = gaussian_vector(m, &mut rng);
    let frob = build_norm_cache(&a)?.frob();

    let mut r = project_out_range(&a, &r_draw)?;
    if linalg::norm(&a.matvec_t(&r)) > 1e-10 * frob * linalg::norm(&r) {
        r = project_out_range(&a, &r)?;
    }
    let ax = a.matvec(&x_draw);
    let b: Vec<f64> = ax.iter().zip(&r).map(|(p, q)| p + q).collect();
    let x_star = direct_least_squares(&a, &b)?;
    let problem = LsProblem {
        a,
        b,
        x_star: Some(x_star),
        r: Some(r),
        label: format!("inconsistent-{m}x{n}-s{seed}"),
    };
    problem.check_invariants()?;
    Ok(problem)
}

/// Consistent instance `b = A x̂` with stored `x⋆ = A†b` and `r = 0`.
pub fn make_consistent_problem(a: impl Into<Matrix>, seed: u64) -> Result<LsProblem, ProblemError> {
    let a = a.into();
    let (m, n) = a.shape();
    let mut rng = rng::stream(rng::derive_seed(seed, &["consistent-rhs"]));
    let x_draw = gaussian_vector(n, &mut rng);
    let b = a.matvec(&x_draw);
    let x_star = direct_least_squares(&a, &b)?;
    let problem = LsProblem {
        a,
        b,
        x_star: Some(x_star),
        r: Some(vec![0.0; m]),
        label: format!("consistent-{m}x{n}-s{seed}"),
    };
    problem.check_invariants()?;
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_deterministic() {
        assert_eq!(gen_gaussian(2, 2, 9), gen_gaussian(2, 2, 9));
        assert_ne!(gen_gaussian(3, 3, 1), gen_gaussian(3, 3, 2));
    }

    #[test]
    fn gaussian_moments() {
        let a = gen_gaussian(1000, 100, 17);
        let v = a.values();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() <= 0.1, "var {var}");
    }

    #[test]
    fn identity_problem_is_consistent() {
        let p = make_inconsistent_problem(DenseMatrix::identity(2), 3).unwrap();
        assert!(p.r.as_ref().unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn single_column_residual_is_antisymmetric() {
        let a = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        for seed in 0..5 {
            let p = make_inconsistent_problem(a.clone(), seed).unwrap();
            let r = p.r.unwrap();
            assert!((r[0] + r[1]).abs() < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn gaussian_problem_orthogonality() {
        let p = make_inconsistent_problem(gen_gaussian(50, 10, 4), 5).unwrap();
        let r = p.r.as_ref().unwrap();
        let frob = build_norm_cache(&p.a).unwrap().frob();
        let ratio = linalg::norm(&p.a.matvec_t(r)) / (frob * linalg::norm(r));
        assert!(ratio <= 1e-8, "{ratio}");
        p.check_invariants().unwrap();
    }

    #[test]
    fn rank_deficient_x_star_is_least_norm() {
        let g = gen_gaussian(30, 3, 6);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let r = g.row(i);
                vec![r[0], r[1], r[2], r[0] + r[1]]
            })
            .collect();
        let a = DenseMatrix::from_rows(&rows).unwrap();
        let p = make_inconsistent_problem(a, 8).unwrap();
        let x = p.x_star.as_ref().unwrap();
        // least-norm ⇒ orthogonal to the null space direction (1, 1, 0, −1)
        let null_comp = x[0] + x[1] - x[3];
        assert!(null_comp.abs() < 1e-10);
        p.check_invariants().unwrap();
    }

    #[test]
    fn range_split_cases() {
        let s = range_split(&DenseMatrix::identity(2).into(), &[3.0, 4.0]).unwrap();
        assert!((s.b_range[0] - 3.0).abs() < 1e-14 && (s.b_range[1] - 4.0).abs() < 1e-14);
        assert!(s.b_perp.iter().all(|v| v.abs() < 1e-14));
        let axis: Matrix = DenseMatrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap().into();
        let s = range_split(&axis, &[2.0, 5.0]).unwrap();
        assert!((s.b_range[0] - 2.0).abs() < 1e-14 && s.b_range[1].abs() < 1e-14);
        assert!(s.b_perp[0].abs() < 1e-14 && (s.b_perp[1] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn range_split_pythagoras() {
        let a: Matrix = gen_gaussian(30, 8, 10).into();
        let mut rng = rng::stream(11);
        let b = gaussian_vector(30, &mut rng);
        let s = range_split(&a, &b).unwrap();
        let lhs = linalg::norm_sq(&s.b_range) + linalg::norm_sq(&s.b_perp);
        let rhs = linalg::norm_sq(&b);
        assert!((lhs - rhs).abs() <= 1e-10 * rhs);
        let sum: Vec<f64> = s.b_range.iter().zip(&s.b_perp).map(|(p, q)| p + q).collect();
        assert!(linalg::norm(&linalg::sub(&sum, &b)) <= 1e-10 * linalg::norm(&b));
    }

    #[test]
    fn invariant_check_catches_bad_r() {
        let mut p = make_inconsistent_problem(gen_gaussian(20, 4, 1), 2).unwrap();
        p.r = Some(vec![1.0; 20]);
        assert!(matches!(p.check_invariants(), Err(ProblemError::Invariant(_))));
    }
}
