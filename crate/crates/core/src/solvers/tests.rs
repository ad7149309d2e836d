use super::*;
use crate::linalg::{build_norm_cache, norm, row_space_projector, sub, DenseMatrix, Matrix};
use crate::problem::{gen_gaussian, make_consistent_problem, make_inconsistent_problem, range_split};

fn config(p: &LsProblem, tol: f64, max_iters: usize) -> SolverConfig {
    let mut c = SolverConfig::for_problem(p);
    c.stop.tol = tol;
    c.stop.max_iters = max_iters;
    c
}

#[test]
fn names_round_trip() {
    for k in SolverKind::ALL {
        assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
        assert_eq!(k.to_string(), k.name());
    }
    assert_eq!("trek-alt".parse::<SolverKind>().unwrap(), SolverKind::TrekAlt);
    assert!("FOO".parse::<SolverKind>().is_err());
    let json = serde_json::to_string(&SolverKind::Tsreks).unwrap();
    assert_eq!(json, "\"TSREKS\"");
}

#[test]
fn classification_partitions_kinds() {
    for k in SolverKind::ALL {
        let flags = [k.is_extended(), k.is_consistent(), k.is_projection()];
        assert_eq!(flags.iter().filter(|&&f| f).count(), 1, "{k}");
    }
    for k in [SolverKind::Srek, SolverKind::Tsrek, SolverKind::Tsrk, SolverKind::Sproj] {
        assert!(!k.is_randomized());
    }
    assert!(SolverKind::Tsreks.is_randomized());
}

#[test]
fn zero_rhs_leaves_state_unchanged() {
    let a: Matrix = gen_gaussian(8, 4, 1).into();
    let p = LsProblem::new(a, vec![0.0; 8], "zero").unwrap();
    let cache = build_norm_cache(&p.a).unwrap();
    let cfg = SolverConfig::for_problem(&p);
    for k in SolverKind::ALL {
        let mut s = Solver::new(k, &p, &cache, &cfg, 1).unwrap();
        for _ in 0..3 {
            s.step().unwrap();
        }
        assert_eq!(s.k(), 3);
        assert!(s.x().iter().all(|&v| v == 0.0), "{k}");
        assert!(s.z().iter().all(|&v| v == 0.0), "{k}");
    }
}

#[test]
fn rek_solves_identity() {
    let a: Matrix = DenseMatrix::identity(2).into();
    let mut p = LsProblem::new(a, vec![1.0, -2.0], "id").unwrap();
    p.x_star = Some(vec![1.0, -2.0]);
    let cfg = config(&p, 1e-12, 4);
    let rec = solve(SolverKind::Rek, &p, &cfg, 5).unwrap();
    assert!(rec.iters <= 4);
    let x = &rec.solution;
    // each row step is exact for the identity, so two distinct picks suffice;
    // a run of 4 steps can only miss if the same row was drawn 4 times
    assert!(rec.converged || x.iter().filter(|&&v| v == 0.0).count() == 1);
    if rec.converged {
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] + 2.0).abs() < 1e-5);
    }
}

#[test]
fn semi_randomized_runs_are_bitwise_deterministic() {
    let p = make_inconsistent_problem(gen_gaussian(40, 10, 2), 3).unwrap();
    for k in [SolverKind::Srek, SolverKind::Tsrek] {
        let cfg = config(&p, 1e-8, 2000);
        let a = solve(k, &p, &cfg, 1).unwrap();
        let b = solve(k, &p, &cfg, 99).unwrap();
        assert_eq!(a.solution, b.solution, "{k}: seed must not matter");
        assert_eq!(a.iters, b.iters);
    }
}

#[test]
fn randomized_runs_reproduce_under_seed() {
    let p = make_inconsistent_problem(gen_gaussian(30, 8, 4), 5).unwrap();
    let cfg = config(&p, 1e-6, 400);
    for k in SolverKind::ALL {
        let a = solve(k, &p, &cfg, 11).unwrap();
        let b = solve(k, &p, &cfg, 11).unwrap();
        assert_eq!(a.solution, b.solution, "{k}");
    }
}

#[test]
fn trek_alt_is_treks_with_full_sampling() {
    let p = make_inconsistent_problem(gen_gaussian(30, 8, 6), 7).unwrap();
    let mut cfg = config(&p, 1e-6, 300);
    let alt = solve(SolverKind::TrekAlt, &p, &cfg, 3).unwrap();
    cfg.fraction = 1.0;
    let treks = solve(SolverKind::Treks, &p, &cfg, 3).unwrap();
    assert_eq!(alt.solution, treks.solution);
}

#[test]
fn tsrek_reaches_oracle_solution() {
    let p = make_inconsistent_problem(gen_gaussian(200, 50, 7), 8).unwrap();
    let cfg = config(&p, 1e-9, 500 * 50);
    let rec = solve(SolverKind::Tsrek, &p, &cfg, 0).unwrap();
    assert!(rec.converged);
    assert!(rec.final_rse.unwrap() <= 1e-8, "{:?}", rec.final_rse);
}

#[test]
fn gproj_recovers_orthogonal_component() {
    let p = make_inconsistent_problem(gen_gaussian(60, 15, 9), 10).unwrap();
    let cfg = config(&p, 1e-8, 200 * 15);
    let frob_sq = build_norm_cache(&p.a).unwrap().frob_sq;
    let b_perp = range_split(&p.a, &p.b).unwrap().b_perp;
    for k in [SolverKind::Gproj, SolverKind::Sproj] {
        let rec = solve(k, &p, &cfg, 2).unwrap();
        assert!(rec.converged, "{k}");
        let z = &rec.solution;
        let ratio = norm(&p.a.matvec_t(z)) / (frob_sq * norm(z));
        assert!(ratio <= cfg.stop.tol);
        assert!(norm(&sub(z, &b_perp)) / norm(&p.b) <= 1e-4);
    }
}

#[test]
fn zero_iteration_budget() {
    let p = make_inconsistent_problem(gen_gaussian(10, 4, 1), 1).unwrap();
    let rec = solve(SolverKind::Srek, &p, &config(&p, 1e-5, 0), 0).unwrap();
    assert_eq!(rec.iters, 0);
    assert!(!rec.converged);
    assert_eq!(rec.final_rse, Some(1.0));
}

#[test]
fn rse_examples() {
    let xs = [1.0, -2.0, 0.5];
    assert_eq!(rse(&xs, &xs).unwrap(), 0.0);
    assert_eq!(rse(&[0.0; 3], &xs).unwrap(), 1.0);
    let twice: Vec<f64> = xs.iter().map(|v| 2.0 * v).collect();
    assert!((rse(&twice, &xs).unwrap() - 1.0).abs() < 1e-15);
    assert!(rse(&xs, &[0.0; 3]).is_err());
}

#[test]
fn stopping_rule_examples() {
    let p = make_inconsistent_problem(gen_gaussian(20, 5, 3), 4).unwrap();
    let cache = build_norm_cache(&p.a).unwrap();
    let cfg = SolverConfig::for_problem(&p);
    let mut s = Solver::new(SolverKind::Grek, &p, &cache, &cfg, 0).unwrap();
    assert!(!s.converged(), "x = 0 guard");
    let xs = p.x_star.clone().unwrap();
    s.set_iterates(xs.clone(), p.r.clone().unwrap()).unwrap();
    assert!(s.converged());

    // mid-run state against a hand evaluation of both fractions
    let mut s = Solver::new(SolverKind::Rek, &p, &cache, &cfg, 0).unwrap();
    for _ in 0..7 {
        s.step().unwrap();
    }
    let (x, z) = (s.x().to_vec(), s.z().to_vec());
    let ax = p.a.matvec(&x);
    let res: Vec<f64> = (0..20).map(|i| p.b[i] - z[i] - ax[i]).collect();
    let primary = norm(&res) / (cache.frob() * norm(&x));
    let dual = norm(&p.a.matvec_t(&z)) / (cache.frob_sq * norm(&x));
    let r = s.residuals();
    assert!((r.primary - primary).abs() <= 1e-12 * primary);
    assert!((r.dual - dual).abs() <= 1e-12 * dual);
}

#[test]
fn iterates_stay_in_row_space() {
    // rank-deficient: duplicate a column combination
    let g = gen_gaussian(40, 5, 12);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let r = g.row(i);
            let mut v = r.to_vec();
            v.push(r[0] - r[3]);
            v
        })
        .collect();
    let p = make_inconsistent_problem(DenseMatrix::from_rows(&rows).unwrap(), 3).unwrap();
    let proj = row_space_projector(&p.a).unwrap();
    let cache = build_norm_cache(&p.a).unwrap();
    let cfg = SolverConfig::for_problem(&p);
    for k in SolverKind::EXTENDED {
        let mut s = Solver::new(k, &p, &cache, &cfg, 4).unwrap();
        for _ in 0..60 {
            s.step().unwrap();
            let x = s.x();
            let off = norm(&sub(x, &proj.project(x)));
            assert!(off <= 1e-8 * norm(x).max(1e-300), "{k}: {off}");
        }
    }
}

#[test]
fn sparse_and_dense_storage_agree() {
    let d = gen_gaussian(30, 6, 2);
    let trip: Vec<(usize, usize, f64)> = (0..30)
        .flat_map(|i| (0..6).map(move |j| (i, j)))
        .filter(|&(i, j)| (i + 2 * j) % 3 != 0)
        .map(|(i, j)| (i, j, d.get(i, j)))
        .collect();
    let sp = crate::linalg::DualSparseMatrix::from_triplets(30, 6, &trip).unwrap();
    let dense = Matrix::Sparse(sp.clone()).to_dense();
    let ps = make_inconsistent_problem(sp, 1).unwrap();
    let mut pd = ps.clone();
    pd.a = dense.into();
    let cfg = config(&ps, 1e-10, 3000);
    for k in [SolverKind::Grek, SolverKind::Tsrek, SolverKind::Tgrek, SolverKind::Gproj] {
        let a = solve(k, &ps, &cfg, 5).unwrap();
        let b = solve(k, &pd, &cfg, 5).unwrap();
        assert!(a.converged && b.converged, "{k}");
        let gap = norm(&sub(&a.solution, &b.solution)) / norm(&b.solution);
        assert!(gap <= 1e-6, "{k}: {gap}");
    }
}

#[test]
fn consistent_methods_solve_consistent_systems() {
    let p = make_consistent_problem(gen_gaussian(80, 20, 5), 6).unwrap();
    let cfg = config(&p, 1e-9, 500 * 20);
    for k in SolverKind::CONSISTENT {
        let rec = solve(k, &p, &cfg, 9).unwrap();
        assert!(rec.converged, "{k}");
        assert!(rec.final_rse.unwrap() <= 1e-8, "{k}: {:?}", rec.final_rse);
    }
}

#[test]
fn history_is_recorded_at_checks() {
    let p = make_inconsistent_problem(gen_gaussian(30, 6, 1), 2).unwrap();
    let mut cfg = config(&p, 1e-8, 600);
    cfg.stop.track_history = true;
    let rec = solve(SolverKind::Tsrek, &p, &cfg, 0).unwrap();
    assert!(!rec.history.is_empty());
    assert_eq!(rec.history[0].step, 0);
    for w in rec.history.windows(2) {
        assert_eq!(w[1].step - w[0].step, 6);
    }
}

#[test]
fn invalid_config_rejected() {
    let p = make_inconsistent_problem(gen_gaussian(10, 3, 1), 1).unwrap();
    let mut cfg = SolverConfig::for_problem(&p);
    cfg.fraction = 0.0;
    assert!(matches!(solve(SolverKind::Treks, &p, &cfg, 0), Err(SolverError::InvalidConfig(_))));
    let mut cfg = SolverConfig::for_problem(&p);
    cfg.stop.check_every = 0;
    assert!(solve(SolverKind::Rek, &p, &cfg, 0).is_err());
}
