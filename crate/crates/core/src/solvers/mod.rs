//! The iterative methods, their stopping rule and run bookkeeping.
//!
//! Every method runs on a [`Solver`], which owns the iterates `x` (length
//! `n`) and `z` (length `m`), starting from `x₀ = 0` and `z₀ = b`. One call to
//! [`Solver::step`] is one combined row/column iteration.

mod engine;
mod kind;

pub use engine::{Pick, Solver, StepInfo};
pub use kind::{Rule, SolverKind, UnknownMethod};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, build_norm_cache, LinalgError};
use crate::problem::LsProblem;
use crate::selection::SelectionError;
use crate::updates::UpdateError;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("the reference solution is the zero vector")]
    ZeroReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopConfig {
    pub tol: f64,
    pub check_every: usize,
    pub max_iters: usize,
    pub track_history: bool,
}

impl StopConfig {
    /// Tolerance `1e-5`, checks every `min(m, n)` steps, at most `200·min(m, n)` steps.
    pub fn for_shape(m: usize, n: usize) -> Self {
        let k = m.min(n).max(1);
        Self {
            tol: 1e-5,
            check_every: k,
            max_iters: 200 * k,
            track_history: false,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0) {
            return Err(SolverError::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.check_every == 0 {
            return Err(SolverError::InvalidConfig("check_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub stop: StopConfig,
    /// Sampling fraction for the simple-random-sampling methods.
    pub fraction: f64,
}

pub const DEFAULT_FRACTION: f64 = 0.01;

impl SolverConfig {
    pub fn for_problem(problem: &LsProblem) -> Self {
        Self {
            stop: StopConfig::for_shape(problem.rows(), problem.cols()),
            fraction: DEFAULT_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        self.stop.validate()?;
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(SolverError::InvalidConfig(format!(
                "fraction must lie in (0, 1], got {}",
                self.fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub primary_residual: f64,
    pub dual_residual: f64,
    pub rse: Option<f64>,
}

/// Scaled residuals used by the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `‖b − z − Ax‖ / (‖A‖_F‖x‖)`; `z ≡ 0` for the consistent-system methods.
    pub primary: f64,
    /// `‖Aᵀz‖ / (‖A‖_F²‖x‖)`; for projection-only methods `‖x‖` is replaced
    /// by `max(‖z‖, tol·‖b‖)`.
    pub dual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub kind: SolverKind,
    pub seed: u64,
    pub iters: usize,
    pub wall_time_s: f64,
    pub final_rse: Option<f64>,
    pub final_primary_residual: f64,
    pub final_dual_residual: f64,
    pub converged: bool,
    pub generator: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<HistoryEntry>,
    /// Final iterate; `x` for row methods, `z` for projection-only methods.
    #[serde(skip)]
    pub solution: Vec<f64>,
}

/// `‖x − x⋆‖² / ‖x⋆‖²`.
pub fn rse(x: &[f64], x_star: &[f64]) -> Result<f64, SolverError> {
    let denom = linalg::norm_sq(x_star);
    if denom == 0.0 {
        return Err(SolverError::ZeroReference);
    }
    let num: f64 = x.iter().zip(x_star).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(num / denom)
}

/// Runs `kind` on `problem` until the stopping rule fires or `max_iters` is hit.
pub fn solve(
    kind: SolverKind,
    problem: &LsProblem,
    config: &SolverConfig,
    seed: u64,
) -> Result<RunRecord, SolverError> {
    let cache = build_norm_cache(&problem.a)?;
    Solver::new(kind, problem, &cache, config, seed)?.run()
}

#[cfg(test)]
mod tests;
