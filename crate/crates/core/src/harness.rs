//! Benchmark sweeps: problem descriptors, per-cell seeding, result rows,
//! summaries and CSV output.
//!
//! Cell seeds are `trial_seed(base, [method, problem label], trial)`, so a
//! cell's randomness depends only on its own names.

use std::io::{Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::problem::{
    gen_gaussian, gen_parallel_beam, load_bundle, make_consistent_problem,
    make_inconsistent_problem, read_matrix_market, LsProblem, ProblemError,
};
use crate::rng;
use crate::solvers::{HistoryEntry, RunRecord, SolverConfig, SolverError, SolverKind};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid bench spec: {0}")]
    Spec(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn default_true() -> bool {
    true
}

/// Where a benchmark problem comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum ProblemSpec {
    Gaussian {
        m: usize,
        n: usize,
        seed: u64,
        #[serde(default = "default_true")]
        inconsistent: bool,
    },
    Tomo {
        side: usize,
        angles: usize,
        detectors: usize,
        seed: u64,
    },
    /// A Matrix Market file with a generated inconsistent right-hand side.
    FromMtx { path: PathBuf, seed: u64 },
    /// A saved problem bundle directory.
    Bundle { path: PathBuf },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<LsProblem, ProblemError> {
        match self {
            ProblemSpec::Gaussian {
                m,
                n,
                seed,
                inconsistent,
            } => {
                let a = gen_gaussian(*m, *n, *seed);
                let rhs_seed = rng::derive_seed(*seed, &["rhs"]);
                if *inconsistent {
                    make_inconsistent_problem(a, rhs_seed)
                } else {
                    make_consistent_problem(a, rhs_seed)
                }
            }
            ProblemSpec::Tomo {
                side,
                angles,
                detectors,
                seed,
            } => gen_parallel_beam(*side, *angles, *detectors, *seed),
            ProblemSpec::FromMtx { path, seed } => {
                let a = read_matrix_market(path)?;
                let mut p = make_inconsistent_problem(a, *seed)?;
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
                p.label = format!("{}-s{seed}", stem.unwrap_or_else(|| "mtx".into()));
                Ok(p)
            }
            ProblemSpec::Bundle { path } => Ok(load_bundle(path)?.0),
        }
    }
}

/// A benchmark sweep, usually read from TOML:
///
/// ```toml
/// methods = ["GREK", "TGREK"]
/// trials = 5
/// tol = 1e-5
///
/// [[problems]]
/// generator = "gaussian"
/// m = 400
/// n = 100
/// seed = 1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub methods: Vec<SolverKind>,
    pub problems: Vec<ProblemSpec>,
    #[serde(default = "BenchSpec::default_trials")]
    pub trials: usize,
    #[serde(default = "BenchSpec::default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub check_every: Option<usize>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub fraction: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub rows_csv: Option<PathBuf>,
    #[serde(default)]
    pub summary_csv: Option<PathBuf>,
}

impl BenchSpec {
    fn default_trials() -> usize {
        5
    }

    fn default_tol() -> f64 {
        1e-5
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = toml::from_str(text).map_err(|e| HarnessError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Spec("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Spec("methods must not be empty".into()));
        }
        if self.problems.is_empty() {
            return Err(HarnessError::Spec("problems must not be empty".into()));
        }
        Ok(())
    }

    /// The solver configuration for one problem.
    pub fn config_for(&self, problem: &LsProblem) -> SolverConfig {
        let mut c = SolverConfig::for_problem(problem);
        c.stop.tol = self.tol;
        if let Some(k) = self.check_every {
            c.stop.check_every = k;
        }
        if let Some(k) = self.max_iters {
            c.stop.max_iters = k;
        }
        if let Some(f) = self.fraction {
            c.fraction = f;
        }
        c
    }
}

/// One (method, problem, trial) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: SolverKind,
    pub problem: String,
    pub m: usize,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub iters: usize,
    pub wall_time_ms: f64,
    pub rse: Option<f64>,
    pub primary_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// Set when the run failed; the numeric fields are then zero.
    pub error: Option<String>,
}

impl ResultRow {
    pub fn from_record(record: &RunRecord, problem: &LsProblem, trial: usize) -> Self {
        Self {
            method: record.kind,
            problem: problem.label.clone(),
            m: problem.rows(),
            n: problem.cols(),
            trial,
            seed: record.seed,
            iters: record.iters,
            wall_time_ms: record.wall_time_s * 1e3,
            rse: record.final_rse,
            primary_residual: record.final_primary_residual,
            dual_residual: record.final_dual_residual,
            converged: record.converged,
            error: None,
        }
    }

    fn failed(method: SolverKind, problem: &LsProblem, trial: usize, seed: u64, err: &SolverError) -> Self {
        Self {
            method,
            problem: problem.label.clone(),
            m: problem.rows(),
            n: problem.cols(),
            trial,
            seed,
            iters: 0,
            wall_time_ms: 0.0,
            rse: None,
            primary_residual: 0.0,
            dual_residual: 0.0,
            converged: false,
            error: Some(err.to_string()),
        }
    }

    fn sort_key(&self) -> (&str, SolverKind, usize) {
        (&self.problem, self.method, self.trial)
    }
}

/// Per-(method, problem) means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: SolverKind,
    pub problem: String,
    pub trials: usize,
    pub converged: usize,
    pub failed: usize,
    pub mean_iters: f64,
    pub mean_wall_time_ms: f64,
    /// Mean over rows that report an RSE.
    pub mean_rse: Option<f64>,
}

/// Seed for one bench cell.
pub fn cell_seed(base: u64, method: SolverKind, problem: &str, trial: usize) -> u64 {
    rng::trial_seed(base, &[method.name(), problem], trial)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    /// Sorted by (problem, method, trial).
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

impl BenchOutcome {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }
}

/// Runs every (method, problem, trial) cell, at most `jobs` at a time.
///
/// Problem construction failures abort the sweep; solver failures are
/// recorded in the row's `error` field.
pub fn run_bench(spec: &BenchSpec, jobs: Option<usize>, exec: Execution) -> Result<BenchOutcome, HarnessError> {
    spec.validate()?;
    let problems = spec
        .problems
        .iter()
        .map(ProblemSpec::build)
        .collect::<Result<Vec<_>, _>>()?;
    let cells: Vec<(usize, SolverKind, usize)> = (0..problems.len())
        .flat_map(|p| {
            spec.methods
                .iter()
                .flat_map(move |&k| (0..spec.trials).map(move |t| (p, k, t)))
        })
        .collect();
    let mut rows = exec::with_jobs(jobs, || {
        exec::map_slice(exec, &cells, |&(p, kind, trial)| {
            let problem = &problems[p];
            let seed = cell_seed(spec.seed, kind, &problem.label, trial);
            let config = spec.config_for(problem);
            match crate::solvers::solve(kind, problem, &config, seed) {
                Ok(rec) => ResultRow::from_record(&rec, problem, trial),
                Err(e) => ResultRow::failed(kind, problem, trial, seed, &e),
            }
        })
    });
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let summary = summarize(&rows);
    Ok(BenchOutcome { rows, summary })
}

/// Groups rows by (problem, method) in first-seen order of the sorted rows.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(&str, SolverKind, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| g.0 == r.problem && g.1 == r.method) {
            Some(g) => g.2.push(r),
            None => groups.push((&r.problem, r.method, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(problem, method, g)| {
            let n = g.len() as f64;
            let rses: Vec<f64> = g.iter().filter_map(|r| r.rse).collect();
            SummaryRow {
                method,
                problem: problem.to_string(),
                trials: g.len(),
                converged: g.iter().filter(|r| r.converged).count(),
                failed: g.iter().filter(|r| r.error.is_some()).count(),
                mean_iters: g.iter().map(|r| r.iters as f64).sum::<f64>() / n,
                mean_wall_time_ms: g.iter().map(|r| r.wall_time_ms).sum::<f64>() / n,
                mean_rse: (!rses.is_empty()).then(|| rses.iter().sum::<f64>() / rses.len() as f64),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(items: &[T], out: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for item in items {
        w.serialize(item)?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: "<csv>".into(),
        source,
    })
}

pub fn write_rows_csv(rows: &[ResultRow], out: impl Write) -> Result<(), HarnessError> {
    write_csv(rows, out)
}

pub fn write_summary_csv(summary: &[SummaryRow], out: impl Write) -> Result<(), HarnessError> {
    write_csv(summary, out)
}

/// Columns `step, primary_residual, dual_residual, rse`.
pub fn write_history_csv(history: &[HistoryEntry], out: impl Write) -> Result<(), HarnessError> {
    write_csv(history, out)
}

pub fn read_rows_csv(input: impl Read) -> Result<Vec<ResultRow>, HarnessError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<Vec<_>, _>>()
        .map_err(HarnessError::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> BenchSpec {
        BenchSpec::from_toml_str(
            r#"
            methods = ["GREK", "TSREK"]
            tol = 1e-6
            seed = 4

            [[problems]]
            generator = "gaussian"
            m = 40
            n = 10
            seed = 2
            "#,
        )
        .unwrap()
    }

    #[test]
    fn spec_defaults_and_validation() {
        let s = small_spec();
        assert_eq!(s.trials, 5);
        assert_eq!(s.problems[0], ProblemSpec::Gaussian { m: 40, n: 10, seed: 2, inconsistent: true });
        assert!(BenchSpec::from_toml_str("methods = []\n[[problems]]\ngenerator = \"bundle\"\npath = \"x\"").is_err());
        assert!(BenchSpec::from_toml_str("methods = [\"NOPE\"]\nproblems = []").is_err());
        assert!(BenchSpec::from_toml_str("methods = [\"REK\"]\ntrials = 0\n[[problems]]\ngenerator = \"bundle\"\npath = \"x\"").is_err());
    }

    #[test]
    fn cardinality_and_summary_means() {
        let out = run_bench(&small_spec(), Some(2), Execution::Parallel).unwrap();
        assert_eq!(out.rows.len(), 10);
        assert_eq!(out.summary.len(), 2);
        for s in &out.summary {
            let iters: Vec<f64> = out
                .rows
                .iter()
                .filter(|r| r.method == s.method)
                .map(|r| r.iters as f64)
                .collect();
            assert_eq!(s.mean_iters, iters.iter().sum::<f64>() / iters.len() as f64);
            assert_eq!(s.trials, 5);
        }
        assert!(!out.any_failed());
    }

    #[test]
    fn rows_are_stable_across_execution_modes() {
        let spec = small_spec();
        let a = run_bench(&spec, None, Execution::Parallel).unwrap();
        let b = run_bench(&spec, None, Execution::Sequential).unwrap();
        let strip = |rows: &[ResultRow]| {
            rows.iter()
                .map(|r| ResultRow { wall_time_ms: 0.0, ..r.clone() })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a.rows), strip(&b.rows));
    }

    #[test]
    fn adding_a_method_keeps_other_seeds() {
        let mut spec = small_spec();
        let before = run_bench(&spec, None, Execution::Parallel).unwrap();
        spec.methods.insert(0, SolverKind::Rek);
        let after = run_bench(&spec, None, Execution::Parallel).unwrap();
        for r in &before.rows {
            let twin = after.rows.iter().find(|q| q.method == r.method && q.trial == r.trial).unwrap();
            assert_eq!((twin.seed, twin.iters, twin.rse), (r.seed, r.iters, r.rse));
        }
    }

    #[test]
    fn csv_round_trip() {
        let out = run_bench(&small_spec(), None, Execution::Parallel).unwrap();
        let mut buf = Vec::new();
        write_rows_csv(&out.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("method,problem,m,n,trial,seed,iters,wall_time_ms,rse,"));
        let back = read_rows_csv(buf.as_slice()).unwrap();
        assert_eq!(back, out.rows);
        assert_eq!(summarize(&back), out.summary);
    }
}
