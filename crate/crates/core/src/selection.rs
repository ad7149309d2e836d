//! Row and column selection rules.
//!
//! Scores are homogeneous residuals: the squared residual component divided by
//! the squared norm of its row (or column). Zero-norm rows and columns always
//! score 0, carry weight 0 and are left out of every selection domain.

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::linalg::{Matrix, NormCache};
use crate::rng::SolverRng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    /// The residual driving the selection is exactly zero.
    #[error("residual is zero; nothing left to select")]
    Converged,
    #[error("degenerate selection domain: {0}")]
    Degenerate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Column,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    /// `residual² / norm²`, 0 on zero-norm entries.
    pub scores: Vec<f64>,
    /// Unnormalized `residual²`, 0 on zero-norm entries.
    pub weights: Vec<f64>,
    /// `‖residual‖²`.
    pub total_sq: f64,
    pub axis: Axis,
}

impl ScoreVector {
    pub fn from_residual(residual: &[f64], sq_norms: &[f64], axis: Axis) -> Self {
        let mut s = Self {
            scores: Vec::new(),
            weights: Vec::new(),
            total_sq: 0.0,
            axis,
        };
        s.refill(residual, sq_norms);
        s
    }

    /// Recomputes in place, reusing the buffers.
    pub fn refill(&mut self, residual: &[f64], sq_norms: &[f64]) {
        debug_assert_eq!(residual.len(), sq_norms.len());
        self.scores.clear();
        self.weights.clear();
        let mut total = 0.0;
        for (&r, &nsq) in residual.iter().zip(sq_norms) {
            let w = r * r;
            total += w;
            if nsq > 0.0 {
                self.scores.push(w / nsq);
                self.weights.push(w);
            } else {
                self.scores.push(0.0);
                self.weights.push(0.0);
            }
        }
        self.total_sq = total;
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedySelection {
    pub epsilon: f64,
    pub index_set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub indices: Vec<usize>,
    pub fraction: f64,
}

/// Indices with nonzero squared norm.
pub fn nonzero_domain(sq_norms: &[f64]) -> Vec<usize> {
    (0..sq_norms.len()).filter(|&i| sq_norms[i] > 0.0).collect()
}

/// Scores of `b − z − Ax` (pass `z = None` for the plain residual `b − Ax`).
pub fn row_scores(a: &Matrix, cache: &NormCache, x: &[f64], b: &[f64], z: Option<&[f64]>) -> ScoreVector {
    let ax = a.matvec(x);
    let residual: Vec<f64> = match z {
        Some(z) => (0..b.len()).map(|i| b[i] - z[i] - ax[i]).collect(),
        None => (0..b.len()).map(|i| b[i] - ax[i]).collect(),
    };
    ScoreVector::from_residual(&residual, &cache.row_sq_norms, Axis::Row)
}

/// Scores of `Aᵀz`.
pub fn col_scores(a: &Matrix, cache: &NormCache, z: &[f64]) -> ScoreVector {
    let s = a.matvec_t(z);
    ScoreVector::from_residual(&s, &cache.col_sq_norms, Axis::Column)
}

/// `ε = ½(max score / ‖residual‖² + 1/‖A‖_F²)`.
pub fn greedy_threshold(s: &ScoreVector, frob_sq: f64) -> Result<f64, SelectionError> {
    if s.total_sq <= 0.0 {
        return Err(SelectionError::Converged);
    }
    Ok(0.5 * (s.max_score() / s.total_sq + 1.0 / frob_sq))
}

/// `{ i : scores[i] ≥ ε·total_sq }`.
///
/// The cut is capped at the maximum score. In exact arithmetic
/// `ε·total_sq ≤ max score` always holds, so the cap only absorbs rounding
/// and keeps the argmax in the set.
pub fn build_index_set(s: &ScoreVector, epsilon: f64) -> Vec<usize> {
    let cut = (epsilon * s.total_sq).min(s.max_score());
    (0..s.len())
        .filter(|&i| s.weights[i] > 0.0 && s.scores[i] >= cut)
        .collect()
}

pub fn greedy_select(s: &ScoreVector, frob_sq: f64) -> Result<GreedySelection, SelectionError> {
    let epsilon = greedy_threshold(s, frob_sq)?;
    let index_set = build_index_set(s, epsilon);
    if index_set.is_empty() {
        return Err(SelectionError::Converged);
    }
    Ok(GreedySelection { epsilon, index_set })
}

/// Draws from `set` with probability `weight(i) / Σ weight`, skipping `exclude`.
fn draw_weighted(
    set: &[usize],
    weight: impl Fn(usize) -> f64,
    exclude: Option<usize>,
    rng: &mut SolverRng,
) -> Option<usize> {
    let usable = |i: usize| Some(i) != exclude;
    let total: f64 = set.iter().filter(|&&i| usable(i)).map(|&i| weight(i)).sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for &i in set.iter().filter(|&&i| usable(i)) {
        let w = weight(i);
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if target < acc {
            return last;
        }
    }
    last
}

/// Picks from `set` with probability proportional to the unnormalized squared residual.
pub fn weighted_pick(s: &ScoreVector, set: &[usize], rng: &mut SolverRng) -> Result<usize, SelectionError> {
    draw_weighted(set, |i| s.weights[i], None, rng).ok_or(SelectionError::Converged)
}

/// Two distinct picks by residual weight.
///
/// The second index is drawn from the conditional distribution given that it
/// differs from the first, which is the limit of redrawing until distinct.
/// `None` in the second slot means no other index has positive weight.
pub fn weighted_pick_pair(
    s: &ScoreVector,
    set: &[usize],
    rng: &mut SolverRng,
) -> Result<(usize, Option<usize>), SelectionError> {
    let first = weighted_pick(s, set, rng)?;
    let second = draw_weighted(set, |i| s.weights[i], Some(first), rng);
    Ok((first, second))
}

fn axis_norms(cache: &NormCache, axis: Axis) -> &[f64] {
    match axis {
        Axis::Row => &cache.row_sq_norms,
        Axis::Column => &cache.col_sq_norms,
    }
}

/// Picks from `set` with probability proportional to squared row or column norm.
pub fn weighted_pick_norms(
    cache: &NormCache,
    set: &[usize],
    axis: Axis,
    rng: &mut SolverRng,
) -> Result<usize, SelectionError> {
    let norms = axis_norms(cache, axis);
    draw_weighted(set, |i| norms[i], None, rng)
        .ok_or_else(|| SelectionError::Degenerate("all norms in the set are zero".into()))
}

/// Two distinct norm-weighted picks; see [`weighted_pick_pair`].
pub fn weighted_pick_norms_pair(
    cache: &NormCache,
    set: &[usize],
    axis: Axis,
    rng: &mut SolverRng,
) -> Result<(usize, Option<usize>), SelectionError> {
    let norms = axis_norms(cache, axis);
    let first = weighted_pick_norms(cache, set, axis, rng)?;
    let second = draw_weighted(set, |i| norms[i], Some(first), rng);
    Ok((first, second))
}

/// Sample size `max(2, round(fraction · population))`, capped at the population.
pub fn sample_size(population: usize, fraction: f64) -> usize {
    ((fraction * population as f64).round() as usize).max(2).min(population)
}

/// Uniform sample of positions `0..population` without replacement, sorted.
pub fn simple_random_sample(
    population: usize,
    fraction: f64,
    rng: &mut SolverRng,
) -> Result<SampleSet, SelectionError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SelectionError::Degenerate(format!(
            "sampling fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if population < 2 {
        return Err(SelectionError::Degenerate(format!(
            "population of {population} cannot supply a distinct pair"
        )));
    }
    let k = sample_size(population, fraction);
    let mut indices = if k == population {
        (0..population).collect()
    } else {
        index::sample(rng, population, k).into_vec()
    };
    indices.sort_unstable();
    Ok(SampleSet { indices, fraction })
}

/// `true` when `(sa, ia)` ranks before `(sb, ib)`: higher score, then lower index.
fn ranks_before(sa: f64, ia: usize, sb: f64, ib: usize) -> bool {
    sa > sb || (sa == sb && ia < ib)
}

/// Highest-scoring index of `domain`, ties to the lowest index.
pub fn argmax(s: &ScoreVector, domain: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &i in domain {
        match best {
            Some(b) if !ranks_before(s.scores[i], i, s.scores[b], b) => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Best and second-best indices of `domain`, ties to the lowest index.
pub fn top_two(s: &ScoreVector, domain: &[usize]) -> Result<(usize, usize), SelectionError> {
    if domain.len() < 2 {
        return Err(SelectionError::Degenerate(format!(
            "top_two needs at least 2 candidates, got {}",
            domain.len()
        )));
    }
    let mut first: Option<usize> = None;
    let mut second: Option<usize> = None;
    for &i in domain {
        let si = s.scores[i];
        match first {
            Some(f) if !ranks_before(si, i, s.scores[f], f) => match second {
                Some(g) if !ranks_before(si, i, s.scores[g], g) => {}
                _ => second = Some(i),
            },
            _ => {
                second = first;
                first = Some(i);
            }
        }
    }
    Ok((first.expect("nonempty"), second.expect("two candidates")))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // naive index loops are the oracle
mod tests {
    use super::*;
    use crate::linalg::{build_norm_cache, DenseMatrix};
    use crate::rng::stream;
    use proptest::prelude::*;

    fn sv(scores: &[f64]) -> ScoreVector {
        // unit norms: weights = scores
        ScoreVector::from_residual(
            &scores.iter().map(|s| s.sqrt()).collect::<Vec<_>>(),
            &vec![1.0; scores.len()],
            Axis::Row,
        )
    }

    #[test]
    fn identity_row_scores() {
        let a: Matrix = DenseMatrix::identity(2).into();
        let c = build_norm_cache(&a).unwrap();
        let s = row_scores(&a, &c, &[0.0, 0.0], &[1.0, 0.0], None);
        assert_eq!(s.scores, vec![1.0, 0.0]);
        assert_eq!(s.total_sq, 1.0);
        let s = row_scores(&a, &c, &[1.0, 0.0], &[1.0, 0.0], None);
        assert!(s.scores.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scores_match_naive_loop() {
        let a = crate::problem::gen_gaussian(6, 3, 4);
        let m: Matrix = a.clone().into();
        let c = build_norm_cache(&m).unwrap();
        let x = [0.3, -1.0, 2.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let z = [0.5, 0.0, -0.5, 1.0, 0.0, 2.0];
        let s = row_scores(&m, &c, &x, &b, Some(&z));
        let mut total = 0.0;
        for i in 0..6 {
            let row = a.row(i);
            let mut ax = 0.0;
            let mut nsq = 0.0;
            for j in 0..3 {
                ax += row[j] * x[j];
                nsq += row[j] * row[j];
            }
            let r = b[i] - z[i] - ax;
            total += r * r;
            assert!((s.scores[i] - r * r / nsq).abs() <= 1e-12 * (1.0 + s.scores[i]));
        }
        assert!((s.total_sq - total).abs() <= 1e-12 * total);

        let cs = col_scores(&m, &c, &z);
        for j in 0..3 {
            let mut p = 0.0;
            let mut nsq = 0.0;
            for i in 0..6 {
                p += a.get(i, j) * z[i];
                nsq += a.get(i, j).powi(2);
            }
            assert!((cs.scores[j] - p * p / nsq).abs() <= 1e-12 * (1.0 + cs.scores[j]));
        }
    }

    #[test]
    fn col_scores_identity() {
        let a: Matrix = DenseMatrix::identity(2).into();
        let c = build_norm_cache(&a).unwrap();
        assert_eq!(col_scores(&a, &c, &[0.0, 3.0]).scores, vec![0.0, 9.0]);
    }

    #[test]
    fn col_scores_vanish_on_orthogonal_complement() {
        let a: Matrix = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]])
            .unwrap()
            .into();
        let c = build_norm_cache(&a).unwrap();
        assert!(col_scores(&a, &c, &[0.0, 0.0, 7.0]).scores.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_norm_rows_score_zero() {
        let s = ScoreVector::from_residual(&[2.0, 3.0], &[0.0, 1.0], Axis::Row);
        assert_eq!(s.scores, vec![0.0, 9.0]);
        assert_eq!(s.weights, vec![0.0, 9.0]);
    }

    #[test]
    fn threshold_examples() {
        let a: Matrix = DenseMatrix::identity(2).into();
        let c = build_norm_cache(&a).unwrap();
        let s = col_scores(&a, &c, &[1.0, 0.0]);
        assert!((greedy_threshold(&s, c.frob_sq).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(build_index_set(&s, 0.75), vec![0]);

        for m in [2usize, 3, 7, 10] {
            let s = ScoreVector::from_residual(&vec![1.0; m], &vec![1.0; m], Axis::Row);
            let eps = greedy_threshold(&s, m as f64).unwrap();
            assert!((eps - 1.0 / m as f64).abs() < 1e-15);
            assert_eq!(build_index_set(&s, eps), (0..m).collect::<Vec<_>>());
        }

        let s = sv(&[4.0, 1.0, 1.0]);
        let eps = greedy_threshold(&s, 3.0).unwrap();
        assert!((eps - 0.5).abs() < 1e-15);
        assert_eq!(build_index_set(&s, eps), vec![0]);

        let zero = sv(&[0.0, 0.0]);
        assert_eq!(greedy_threshold(&zero, 2.0), Err(SelectionError::Converged));
    }

    #[test]
    fn threshold_matches_formula() {
        let a: Matrix = crate::problem::gen_gaussian(8, 4, 2).into();
        let c = build_norm_cache(&a).unwrap();
        let s = row_scores(&a, &c, &[0.1, 0.2, 0.3, 0.4], &[1.0; 8], None);
        let max = s.scores.iter().cloned().fold(f64::MIN, f64::max);
        let direct = 0.5 * (max / s.total_sq + 1.0 / c.frob_sq);
        assert!((greedy_threshold(&s, c.frob_sq).unwrap() - direct).abs() <= 1e-15);
    }

    #[test]
    fn weighted_pick_frequencies() {
        let s = sv(&[3.0, 1.0]);
        let mut rng = stream(5);
        assert_eq!(weighted_pick(&s, &[1], &mut rng).unwrap(), 1);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| weighted_pick(&s, &[0, 1], &mut rng).unwrap() == 0)
            .count();
        let f = hits as f64 / n as f64;
        assert!((f - 0.75).abs() < 0.01, "{f}");

        // chi-square, 2 dof, 99% critical value 9.21
        let s = sv(&[1.0, 1.0, 1.0]);
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[weighted_pick(&s, &[0, 1, 2], &mut rng).unwrap()] += 1;
        }
        let e = n as f64 / 3.0;
        let chi: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(chi < 9.21, "{chi}");

        assert_eq!(weighted_pick(&sv(&[0.0, 0.0]), &[0, 1], &mut rng), Err(SelectionError::Converged));
    }

    #[test]
    fn norm_pick_frequencies_and_zero_rows() {
        let a: Matrix = DenseMatrix::diag(&[1.0, 0.0, 3f64.sqrt()]).into();
        let c = build_norm_cache(&a).unwrap();
        let mut rng = stream(8);
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            counts[weighted_pick_norms(&c, &[0, 1, 2], Axis::Row, &mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[1], 0);
        let f = counts[2] as f64 / n as f64;
        assert!((f - 0.75).abs() < 0.01, "{f}");
        assert_eq!(weighted_pick_norms(&c, &[2], Axis::Column, &mut rng).unwrap(), 2);
        assert!(weighted_pick_norms(&c, &[1], Axis::Row, &mut rng).is_err());
    }

    #[test]
    fn pair_picks_are_distinct() {
        let s = sv(&[1.0, 5.0, 2.0, 0.0]);
        let mut rng = stream(1);
        for _ in 0..2000 {
            let (i, j) = weighted_pick_pair(&s, &[0, 1, 2, 3], &mut rng).unwrap();
            let j = j.unwrap();
            assert_ne!(i, j);
            assert!(i != 3 && j != 3);
        }
        let (_, none) = weighted_pick_pair(&s, &[1, 3], &mut rng).unwrap();
        assert_eq!(none, None);
    }

    #[test]
    fn sampling_sizes_and_frequencies() {
        let mut rng = stream(2);
        assert_eq!(simple_random_sample(7, 1.0, &mut rng).unwrap().indices, (0..7).collect::<Vec<_>>());
        assert_eq!(simple_random_sample(4000, 0.01, &mut rng).unwrap().indices.len(), 40);
        assert_eq!(simple_random_sample(10, 0.01, &mut rng).unwrap().indices.len(), 2);
        assert!(simple_random_sample(1, 0.5, &mut rng).is_err());
        assert!(simple_random_sample(10, 0.0, &mut rng).is_err());
        assert!(simple_random_sample(10, 1.5, &mut rng).is_err());

        let (pop, frac, reps) = (50usize, 0.2, 10_000usize);
        let mut counts = vec![0usize; pop];
        for _ in 0..reps {
            for i in simple_random_sample(pop, frac, &mut rng).unwrap().indices {
                counts[i] += 1;
            }
        }
        let sigma = (reps as f64 * frac * (1.0 - frac)).sqrt();
        for c in counts {
            assert!((c as f64 - reps as f64 * frac).abs() <= 4.0 * sigma, "{c}");
        }
    }

    #[test]
    fn top_two_examples() {
        assert_eq!(top_two(&sv(&[0.1, 0.9, 0.5]), &[0, 1, 2]).unwrap(), (1, 2));
        assert_eq!(top_two(&sv(&[0.5, 0.5]), &[0, 1]).unwrap(), (0, 1));
        assert_eq!(top_two(&sv(&[0.5, 0.5, 0.5]), &[2, 1, 0]).unwrap(), (0, 1));
        assert!(top_two(&sv(&[1.0]), &[0]).is_err());
        assert_eq!(argmax(&sv(&[0.2, 0.7, 0.7]), &[0, 1, 2]), Some(1));
    }

    #[test]
    fn top_two_matches_sort() {
        let mut rng = stream(3);
        for _ in 0..50 {
            // coarse values force ties
            let scores: Vec<f64> = (0..100).map(|_| f64::from(rng.random_range(0u8..20))).collect();
            let s = sv(&scores);
            let domain: Vec<usize> = (0..100).collect();
            let mut order = domain.clone();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            assert_eq!(top_two(&s, &domain).unwrap(), (order[0], order[1]));
        }
    }

    proptest! {
        #[test]
        fn argmax_always_in_set(
            res in prop::collection::vec(-10.0f64..10.0, 1..40),
            norms in prop::collection::vec(0.01f64..5.0, 40),
        ) {
            let s = ScoreVector::from_residual(&res, &norms[..res.len()], Axis::Row);
            prop_assume!(s.total_sq > 0.0);
            let frob: f64 = norms[..res.len()].iter().sum();
            let sel = greedy_select(&s, frob).unwrap();
            let best = argmax(&s, &(0..res.len()).collect::<Vec<_>>()).unwrap();
            prop_assert!(sel.index_set.contains(&best));
        }

        #[test]
        fn samples_distinct_and_in_range(pop in 2usize..500, frac in 0.001f64..=1.0, seed in 0u64..1000) {
            let mut rng = stream(seed);
            let s = simple_random_sample(pop, frac, &mut rng).unwrap();
            prop_assert_eq!(s.indices.len(), sample_size(pop, frac));
            prop_assert!(s.indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(s.indices.iter().all(|&i| i < pop));
        }
    }
}
