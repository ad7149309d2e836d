//! Randomized extended Kaczmarz solvers for `min ‖b − Ax‖₂`.
//!
//! The crate provides one- and two-dimensional row/column action methods
//! (greedy, semi-randomized and simple-random-sampling variants), the problem
//! generators used to benchmark them, and a `theory` module that evaluates
//! the closed-form convergence-rate bounds and checks them by Monte Carlo.
//!
//! ```
//! use rek_core::problem::{gen_gaussian, make_inconsistent_problem};
//! use rek_core::solvers::{solve, SolverConfig, SolverKind};
//!
//! let a = gen_gaussian(60, 12, 1);
//! let problem = make_inconsistent_problem(a, 2).unwrap();
//! let mut config = SolverConfig::for_problem(&problem);
//! config.stop.tol = 1e-8;
//! let record = solve(SolverKind::Tsrek, &problem, &config, 3).unwrap();
//! assert!(record.converged);
//! assert!(record.final_rse.unwrap() < 1e-10);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exec;
pub mod harness;
pub mod linalg;
pub mod problem;
pub mod rng;
pub mod selection;
pub mod solvers;
pub mod theory;
pub mod updates;

pub use exec::Execution;
pub use linalg::{DenseMatrix, DualSparseMatrix, LinalgError, Matrix, NormCache};
pub use problem::{LsProblem, ProblemError};
pub use solvers::{solve, RunRecord, SolverConfig, SolverError, SolverKind, StopConfig};
