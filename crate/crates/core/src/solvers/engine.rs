use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use super::{rse, HistoryEntry, Residuals, Rule, RunRecord, SolverConfig, SolverError, SolverKind};
use crate::linalg::{self, Matrix, NormCache};
use crate::problem::LsProblem;
use crate::rng::{self, SolverRng};
use crate::selection::{
    self, argmax, greedy_select, nonzero_domain, top_two, weighted_pick, weighted_pick_norms_pair,
    weighted_pick_pair, Axis, ScoreVector, SelectionError,
};
use crate::updates::{self, Applied};

/// Indices chosen on one side of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pick {
    One(usize),
    Pair(usize, usize),
}

impl Pick {
    fn from_pair(first: usize, second: Option<usize>) -> Self {
        match second {
            Some(s) => Pick::Pair(first, s),
            None => Pick::One(first),
        }
    }
}

/// What one step selected and applied. `None` on a side means that side
/// had nothing to do (no rule, or its residual was exactly zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub rows: Option<Pick>,
    pub cols: Option<Pick>,
    pub row_applied: Option<Applied>,
    pub col_applied: Option<Applied>,
}

/// Selection state for rows or columns.
struct Side {
    axis: Axis,
    rule: Option<Rule>,
    domain: Vec<usize>,
    norm_dist: Option<WeightedIndex<f64>>,
    /// Full residual (`b − z − Ax` for rows, `Aᵀz` for columns), kept only
    /// when the rule scans every component.
    full: Option<Vec<f64>>,
    scores: ScoreVector,
}

impl Side {
    fn new(axis: Axis, rule: Option<Rule>, sq_norms: &[f64]) -> Result<Self, SolverError> {
        let domain = nonzero_domain(sq_norms);
        if rule.is_some() && domain.is_empty() {
            return Err(SolverError::InvalidConfig(format!(
                "every {axis:?} of A is zero"
            )));
        }
        let norm_dist = match rule {
            Some(Rule::NormWeighted) => Some(
                WeightedIndex::new(sq_norms.iter().copied())
                    .map_err(|e| SolverError::InvalidConfig(e.to_string()))?,
            ),
            _ => None,
        };
        let full = rule
            .filter(|r| r.needs_full_residual())
            .map(|_| vec![0.0; sq_norms.len()]);
        Ok(Self {
            axis,
            rule,
            domain,
            norm_dist,
            full,
            scores: ScoreVector::from_residual(&[], &[], axis),
        })
    }

    /// Uniform sample of the domain; the whole domain when it has fewer than two entries.
    fn sample(&self, fraction: f64, rng: &mut SolverRng) -> Result<Vec<usize>, SolverError> {
        if self.domain.len() < 2 {
            return Ok(self.domain.clone());
        }
        let s = selection::simple_random_sample(self.domain.len(), fraction, rng)?;
        Ok(s.indices.into_iter().map(|p| self.domain[p]).collect())
    }

    fn select(
        &mut self,
        cache: &NormCache,
        rng: &mut SolverRng,
        local: impl Fn(usize) -> f64,
    ) -> Result<Option<Pick>, SolverError> {
        let Some(rule) = self.rule else {
            return Ok(None);
        };
        let sq_norms = match self.axis {
            Axis::Row => &cache.row_sq_norms,
            Axis::Column => &cache.col_sq_norms,
        };
        if rule.needs_full_residual() {
            let full = self.full.as_ref().expect("full residual is maintained");
            self.scores.refill(full, sq_norms);
        }
        let pick = match rule {
            Rule::NormWeighted => {
                let dist = self.norm_dist.as_ref().expect("distribution built");
                Some(Pick::One(dist.sample(rng)))
            }
            Rule::NormPairSampled(fraction) => {
                let set = self.sample(fraction, rng)?;
                let (a, b) = weighted_pick_norms_pair(cache, &set, self.axis, rng)?;
                Some(Pick::from_pair(a, b))
            }
            Rule::Greedy => match greedy_select(&self.scores, cache.frob_sq) {
                Ok(sel) => Some(Pick::One(weighted_pick(&self.scores, &sel.index_set, rng)?)),
                Err(SelectionError::Converged) => None,
                Err(e) => return Err(e.into()),
            },
            Rule::GreedyPair => match greedy_select(&self.scores, cache.frob_sq) {
                Ok(sel) => {
                    let (a, b) = weighted_pick_pair(&self.scores, &sel.index_set, rng)?;
                    Some(Pick::from_pair(a, b))
                }
                Err(SelectionError::Converged) => None,
                Err(e) => return Err(e.into()),
            },
            Rule::Argmax => {
                if self.scores.max_score() > 0.0 {
                    argmax(&self.scores, &self.domain).map(Pick::One)
                } else {
                    None
                }
            }
            Rule::TopTwo => {
                if self.scores.max_score() > 0.0 {
                    Some(top_two_or_one(&self.scores, &self.domain))
                } else {
                    None
                }
            }
            Rule::TopTwoSampled(fraction) => {
                let set = self.sample(fraction, rng)?;
                let residual: Vec<f64> = set.iter().map(|&i| local(i)).collect();
                let norms: Vec<f64> = set.iter().map(|&i| sq_norms[i]).collect();
                let sv = ScoreVector::from_residual(&residual, &norms, self.axis);
                if sv.max_score() > 0.0 {
                    let positions: Vec<usize> = (0..set.len()).collect();
                    Some(match top_two_or_one(&sv, &positions) {
                        Pick::One(p) => Pick::One(set[p]),
                        Pick::Pair(p, q) => Pick::Pair(set[p], set[q]),
                    })
                } else {
                    None
                }
            }
        };
        Ok(pick)
    }
}

fn top_two_or_one(s: &ScoreVector, domain: &[usize]) -> Pick {
    match top_two(s, domain) {
        Ok((a, b)) => Pick::Pair(a, b),
        Err(_) => Pick::One(argmax(s, domain).expect("nonempty domain")),
    }
}

/// One run of one method on one problem.
pub struct Solver<'a> {
    kind: SolverKind,
    problem: &'a LsProblem,
    cache: &'a NormCache,
    config: SolverConfig,
    seed: u64,
    x: Vec<f64>,
    z: Vec<f64>,
    k: usize,
    rng: SolverRng,
    rows: Side,
    cols: Side,
    b_norm: f64,
    history: Vec<HistoryEntry>,
}

impl<'a> Solver<'a> {
    /// Fresh state `x₀ = 0`, `z₀ = b`.
    ///
    /// The random stream depends only on `seed`, so two methods that make the
    /// same draws (for example TREK_ALT and TREKS at fraction 1) follow
    /// identical paths.
    pub fn new(
        kind: SolverKind,
        problem: &'a LsProblem,
        cache: &'a NormCache,
        config: &SolverConfig,
        seed: u64,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        let (m, n) = problem.a.shape();
        if problem.b.len() != m {
            return Err(crate::linalg::LinalgError::DimensionMismatch {
                expected: m,
                found: problem.b.len(),
            }
            .into());
        }
        let rows = Side::new(Axis::Row, kind.row_rule(config.fraction), &cache.row_sq_norms)?;
        let cols = Side::new(Axis::Column, kind.col_rule(config.fraction), &cache.col_sq_norms)?;
        let z = if kind.is_consistent() {
            Vec::new()
        } else {
            problem.b.clone()
        };
        let mut solver = Self {
            kind,
            problem,
            cache,
            config: config.clone(),
            seed,
            x: vec![0.0; n],
            z,
            k: 0,
            rng: rng::stream(rng::derive_seed(seed, &["solver"])),
            rows,
            cols,
            b_norm: linalg::norm(&problem.b),
            history: Vec::new(),
        };
        solver.refresh_residuals();
        Ok(solver)
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Empty for the consistent-system methods.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Overwrites the iterates (lengths must match) and refreshes residuals.
    pub fn set_iterates(&mut self, x: Vec<f64>, z: Vec<f64>) -> Result<(), SolverError> {
        if x.len() != self.x.len() || z.len() != self.z.len() {
            return Err(SolverError::InvalidConfig("iterate length mismatch".into()));
        }
        self.x = x;
        self.z = z;
        self.refresh_residuals();
        Ok(())
    }

    fn a(&self) -> &'a Matrix {
        &self.problem.a
    }

    fn z_at(&self, i: usize) -> f64 {
        if self.z.is_empty() {
            0.0
        } else {
            self.z[i]
        }
    }

    /// Recomputes the maintained full residuals from the iterates.
    fn refresh_residuals(&mut self) {
        let a = self.a();
        if let Some(r) = self.rows.full.as_mut() {
            let ax = a.matvec(&self.x);
            for i in 0..r.len() {
                let zi = if self.z.is_empty() { 0.0 } else { self.z[i] };
                r[i] = self.problem.b[i] - zi - ax[i];
            }
        }
        if let Some(s) = self.cols.full.as_mut() {
            *s = a.matvec_t(&self.z);
        }
    }

    /// Patches the maintained residuals after `x += Σ coef·A^{(i)ᵀ}` and
    /// `z += Σ coef·A_{(j)}` (sparse storage only; dense storage recomputes).
    fn patch_residuals(&mut self, row_applied: Option<Applied>, col_applied: Option<Applied>) {
        let a = self.a();
        if let Some(r) = self.rows.full.as_mut() {
            if let Some(app) = row_applied {
                for (i, coef) in app.terms() {
                    for (j, v) in a.row(i).entries() {
                        a.col(j).axpy(-coef * v, r);
                    }
                }
            }
            if let Some(app) = col_applied {
                for (j, coef) in app.terms() {
                    a.col(j).axpy(-coef, r);
                }
            }
        }
        if let (Some(s), Some(app)) = (self.cols.full.as_mut(), col_applied) {
            for (j, coef) in app.terms() {
                for (i, v) in a.col(j).entries() {
                    a.row(i).axpy(coef * v, s);
                }
            }
        }
    }

    /// One combined iteration: both selections from `(x_k, z_k)`, then the
    /// row step against `b − z_k`, then the column step.
    pub fn step(&mut self) -> Result<StepInfo, SolverError> {
        let a = self.a();
        let b = &self.problem.b;
        let cache = self.cache;

        let (x, z) = (&self.x, &self.z);
        let row_local = |i: usize| {
            let zi = if z.is_empty() { 0.0 } else { z[i] };
            b[i] - zi - a.row(i).dot(x)
        };
        let rows = self.rows.select(cache, &mut self.rng, row_local)?;
        let col_local = |j: usize| a.col(j).dot(z);
        let cols = self.cols.select(cache, &mut self.rng, col_local)?;

        let row_applied = match rows {
            None => None,
            Some(Pick::One(i)) => {
                let rhs = b[i] - self.z_at(i);
                Some(updates::row_update_1d(&mut self.x, a, cache, i, rhs)?)
            }
            Some(Pick::Pair(i1, i2)) => {
                let r1 = b[i1] - self.z_at(i1) - a.row(i1).dot(&self.x);
                let r2 = b[i2] - self.z_at(i2) - a.row(i2).dot(&self.x);
                Some(updates::two_dim_row_update(&mut self.x, a, cache, i1, i2, r1, r2)?)
            }
        };
        let col_applied = match cols {
            None => None,
            Some(Pick::One(j)) => Some(updates::col_project_1d(&mut self.z, a, cache, j)?),
            Some(Pick::Pair(j1, j2)) => Some(updates::two_dim_col_update(&mut self.z, a, cache, j1, j2)?),
        };

        if row_applied.is_some() || col_applied.is_some() {
            match a {
                Matrix::Dense(_) => self.refresh_residuals(),
                Matrix::Sparse(_) => self.patch_residuals(row_applied, col_applied),
            }
        }
        self.k += 1;
        Ok(StepInfo {
            rows,
            cols,
            row_applied,
            col_applied,
        })
    }

    /// Fresh scaled residuals of the current iterates.
    pub fn residuals(&self) -> Residuals {
        let a = self.a();
        let frob_sq = self.cache.frob_sq;
        let frob = frob_sq.sqrt();
        let tol = self.config.stop.tol;
        if self.kind.is_projection() {
            let num = linalg::norm(&a.matvec_t(&self.z));
            let scale = linalg::norm(&self.z).max(tol * self.b_norm);
            let dual = if num == 0.0 { 0.0 } else { num / (frob_sq * scale) };
            return Residuals { primary: 0.0, dual };
        }
        let x_norm = linalg::norm(&self.x);
        let ax = a.matvec(&self.x);
        let b = &self.problem.b;
        let res_sq: f64 = (0..b.len()).map(|i| (b[i] - self.z_at(i) - ax[i]).powi(2)).sum();
        let dual_num = if self.z.is_empty() {
            0.0
        } else {
            linalg::norm(&a.matvec_t(&self.z))
        };
        let ratio = |num: f64, den: f64| {
            if num == 0.0 {
                0.0
            } else if den == 0.0 {
                f64::INFINITY
            } else {
                num / den
            }
        };
        Residuals {
            primary: ratio(res_sq.sqrt(), frob * x_norm),
            dual: ratio(dual_num, frob_sq * x_norm),
        }
    }

    /// The stopping rule, evaluated from fresh residuals.
    ///
    /// Row methods never stop while `x = 0`.
    pub fn converged(&self) -> bool {
        let tol = self.config.stop.tol;
        let r = self.residuals();
        if self.kind.is_projection() {
            return r.dual <= tol;
        }
        if self.x.iter().all(|&v| v == 0.0) {
            return false;
        }
        r.primary <= tol && r.dual <= tol
    }

    /// `‖x − x⋆‖²/‖x⋆‖²` when the problem carries `x⋆` (row methods only).
    pub fn rse(&self) -> Option<f64> {
        if self.kind.is_projection() {
            return None;
        }
        self.problem
            .x_star
            .as_ref()
            .and_then(|xs| rse(&self.x, xs).ok())
    }

    fn checkpoint(&mut self) -> bool {
        self.refresh_residuals();
        let converged = self.converged();
        if self.config.stop.track_history {
            let r = self.residuals();
            self.history.push(HistoryEntry {
                step: self.k,
                primary_residual: r.primary,
                dual_residual: r.dual,
                rse: self.rse(),
            });
        }
        converged
    }

    /// Steps until the stopping rule fires (checked every `check_every`
    /// steps, and at step 0) or `max_iters` steps have run.
    pub fn run(mut self) -> Result<RunRecord, SolverError> {
        let stop = self.config.stop.clone();
        let start = Instant::now();
        let mut converged = self.checkpoint();
        while !converged && self.k < stop.max_iters {
            self.step()?;
            if self.k.is_multiple_of(stop.check_every) {
                converged = self.checkpoint();
            }
        }
        if !converged && !self.k.is_multiple_of(stop.check_every) {
            converged = self.converged();
        }
        let wall_time_s = start.elapsed().as_secs_f64();
        let res = self.residuals();
        let final_rse = self.rse();
        let solution = if self.kind.is_projection() {
            std::mem::take(&mut self.z)
        } else {
            std::mem::take(&mut self.x)
        };
        Ok(RunRecord {
            kind: self.kind,
            seed: self.seed,
            iters: self.k,
            wall_time_s,
            final_rse,
            final_primary_residual: res.primary,
            final_dual_residual: res.dual,
            converged,
            generator: rng::GENERATOR_NAME.to_string(),
            history: self.history,
            solution,
        })
    }
}
