use super::*;
use approx::assert_relative_eq;
use nalgebra::{dmatrix, dvector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_kkt(problem: &QpProblem, sol: &QpSolution) {
    assert_eq!(sol.status, QpStatus::Optimal);
    let k = kkt_report(problem, &sol.x, &sol.multipliers);
    assert!(k.stationarity <= 1e-6, "stationarity {k:?}");
    assert!(k.complementarity <= 1e-6, "complementarity {k:?}");
    assert!(k.dual_infeasibility >= -1e-9, "dual {k:?}");
    assert!(k.primal_violation <= 1e-7 * problem.rhs_scale(), "primal {k:?}");
}

#[test]
fn active_lower_bound() {
    // min x^2 s.t. x >= 1
    let p = QpProblem::new(dmatrix![2.0], dvector![0.0])
        .with_inequalities(dmatrix![1.0], dvector![1.0]);
    let s = solve_qp(&p).unwrap();
    assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-12);
    assert_relative_eq!(s.objective, 1.0, epsilon = 1e-12);
    assert_relative_eq!(s.multipliers.ineq[0], 2.0, epsilon = 1e-10);
    assert_kkt(&p, &s);
}

#[test]
fn symmetric_projection() {
    let p = QpProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0])
        .with_equalities(dmatrix![1.0, 1.0], dvector![1.0]);
    let s = solve_qp(&p).unwrap();
    assert_relative_eq!(s.x, dvector![0.5, 0.5], epsilon = 1e-12);
    assert_relative_eq!(s.objective, 0.25, epsilon = 1e-12);
    assert_kkt(&p, &s);
}

#[test]
fn linear_descent_ray_is_unbounded() {
    let p = QpProblem::new(dmatrix![0.0], dvector![-1.0])
        .with_bounds(dvector![0.0], dvector![f64::INFINITY]);
    let s = solve_qp(&p).unwrap();
    assert_eq!(s.status, QpStatus::Unbounded);
    let ray = s.ray.unwrap();
    assert!(ray[0] > 0.0);
}

#[test]
fn two_asset_target_return() {
    // min 0.04 w1^2 + 0.09 w2^2, w1 + w2 = 1, 0.10 w1 + 0.05 w2 = 0.075
    let p = QpProblem::new(dmatrix![0.08, 0.0; 0.0, 0.18], dvector![0.0, 0.0]).with_equalities(
        dmatrix![1.0, 1.0; 0.10, 0.05],
        dvector![1.0, 0.075],
    );
    let s = solve_qp(&p).unwrap();
    assert_relative_eq!(s.x, dvector![0.5, 0.5], epsilon = 1e-12);
    assert_relative_eq!(s.objective, 0.0325, epsilon = 1e-12);
    assert_kkt(&p, &s);
}

#[test]
fn maximize_parabola_vertex() {
    // max -x^2 + 2x
    let p = QpProblem::new(dmatrix![-2.0], dvector![2.0]);
    let s = solve_qp_maximize(&p).unwrap();
    assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-12);
    assert_relative_eq!(s.objective, 1.0, epsilon = 1e-12);
}

#[test]
fn maximize_lp_on_box() {
    let c = dvector![1.0, -2.0, 0.5, -0.1];
    let p = QpProblem::new(DMatrix::zeros(4, 4), c)
        .with_bounds(DVector::zeros(4), DVector::from_element(4, 1.0));
    let s = solve_qp_maximize(&p).unwrap();
    assert_eq!(s.x, dvector![1.0, 0.0, 1.0, 0.0]);
    assert_relative_eq!(s.objective, 1.5);
}

#[test]
fn maximize_is_negated_minimize() {
    let p = QpProblem::new(dmatrix![-1.0, 0.2; 0.2, -0.5], dvector![0.3, 1.0])
        .with_inequalities(dmatrix![-1.0, -1.0], dvector![-2.0])
        .with_bounds(DVector::zeros(2), DVector::from_element(2, f64::INFINITY));
    let max = solve_qp_maximize(&p).unwrap();
    let min = solve_qp(&p.negated()).unwrap();
    assert_eq!(max.objective, -min.objective);
    assert_eq!(max.x, min.x);
}

#[test]
fn infeasible_bounds_and_rows() {
    let p = QpProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0])
        .with_inequalities(dmatrix![1.0, 1.0], dvector![3.0])
        .with_bounds(DVector::zeros(2), DVector::from_element(2, 1.0));
    let s = solve_qp(&p).unwrap();
    assert_eq!(s.status, QpStatus::Infeasible);
    assert!(s.max_violation > 1e-7);

    let p = QpProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0])
        .with_equalities(dmatrix![1.0, 1.0; 1.0, 1.0], dvector![1.0, 2.0]);
    assert_eq!(solve_qp(&p).unwrap().status, QpStatus::Infeasible);
}

#[test]
fn redundant_equalities_are_tolerated() {
    let p = QpProblem::new(DMatrix::identity(3, 3), dvector![1.0, -1.0, 0.0]).with_equalities(
        dmatrix![1.0, 1.0, 1.0; 2.0, 2.0, 2.0],
        dvector![1.0, 2.0],
    );
    let s = solve_qp(&p).unwrap();
    assert_relative_eq!(s.x.sum(), 1.0, epsilon = 1e-12);
    assert_kkt(&p, &s);
}

#[test]
fn validation_errors() {
    let asym = QpProblem::new(dmatrix![1.0, 0.5; 0.0, 1.0], dvector![0.0, 0.0]);
    assert!(matches!(solve_qp(&asym), Err(QpError::Asymmetric(_))));
    let dims = QpProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0])
        .with_inequalities(dmatrix![1.0, 1.0, 1.0], dvector![0.0]);
    assert!(matches!(solve_qp(&dims), Err(QpError::Dimension(_))));
    let bounds = QpProblem::new(DMatrix::identity(1, 1), dvector![0.0])
        .with_bounds(dvector![1.0], dvector![0.0]);
    assert!(matches!(solve_qp(&bounds), Err(QpError::InvertedBounds(0))));
}

#[test]
fn degenerate_lp_vertex() {
    // max x + y s.t. x + y <= 1, x - y <= 0, x,y >= 0: optimal face x + y = 1, x <= y
    let p = QpProblem::new(DMatrix::zeros(2, 2), dvector![1.0, 1.0])
        .with_inequalities(dmatrix![-1.0, -1.0; -1.0, 1.0], dvector![-1.0, 0.0])
        .with_bounds(DVector::zeros(2), DVector::from_element(2, f64::INFINITY));
    let s = solve_qp_maximize(&p).unwrap();
    assert_relative_eq!(s.objective, 1.0, epsilon = 1e-12);
    assert_kkt(&p.negated(), &s);
}

/// Independent oracle: enumerate which bound each variable sits at (lower, upper, or free),
/// solve the KKT system of the remaining equality-constrained problem by LU, and keep the
/// best feasible candidate. Requires `Q` positive definite.
fn enumeration_oracle(p: &QpProblem) -> f64 {
    let n = p.n_vars();
    let m = p.a_eq().nrows();
    let mut best = f64::INFINITY;
    let mut state = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&j| state[j] == 0).collect();
        let mut x = DVector::zeros(n);
        for j in 0..n {
            x[j] = match state[j] {
                1 => p.lb()[j],
                2 => p.ub()[j],
                _ => 0.0,
            };
        }
        let nf = free.len();
        let dim = nf + m;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        let fixed_q = p.q() * &x;
        let fixed_a = p.a_eq() * &x;
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                kkt[(r, c)] = p.q()[(i, j)];
            }
            for e in 0..m {
                kkt[(r, nf + e)] = p.a_eq()[(e, i)];
                kkt[(nf + e, r)] = p.a_eq()[(e, i)];
            }
            rhs[r] = -p.c()[i] - fixed_q[i];
        }
        for e in 0..m {
            rhs[nf + e] = p.b_eq()[e] - fixed_a[e];
        }
        let solved = if dim == 0 { Some(rhs.clone()) } else { kkt.lu().solve(&rhs) };
        if let Some(sol) = solved {
            for (r, &j) in free.iter().enumerate() {
                x[j] = sol[r];
            }
            if sol.iter().all(|v| v.is_finite()) && p.max_violation(&x) <= 1e-9 {
                best = best.min(p.objective(&x));
            }
        }
        // next state in base 3
        let mut j = 0;
        while j < n && state[j] == 2 {
            state[j] = 0;
            j += 1;
        }
        if j == n {
            break;
        }
        state[j] += 1;
    }
    best
}

fn random_boxed_qp(rng: &mut ChaCha8Rng, with_eq: bool) -> QpProblem {
    let n = rng.random_range(1..=6);
    let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = &f * f.transpose() + DMatrix::identity(n, n) * 0.1;
    let c = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let lb = DVector::from_fn(n, |_, _| rng.random_range(-1.0..0.0));
    let ub = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.5));
    let mut p = QpProblem::new(q, c).with_bounds(lb, ub);
    if with_eq {
        let a = DMatrix::from_fn(1, n, |_, _| rng.random_range(0.2..1.0));
        // value attained by the box midpoint keeps the instance feasible
        let mid = (p.lb() + p.ub()) * 0.5;
        let b = &a * mid;
        p = p.with_equalities(a, b);
    }
    p
}

#[test]
fn matches_enumeration_oracle_on_boxed_qps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..300 {
        let p = random_boxed_qp(&mut rng, case % 2 == 1);
        let s = solve_qp(&p).unwrap();
        assert_kkt(&p, &s);
        let oracle = enumeration_oracle(&p);
        assert!(
            (s.objective - oracle).abs() <= 1e-6 * (1.0 + oracle.abs()),
            "case {case}: solver {} oracle {oracle}",
            s.objective
        );
    }
}

#[test]
fn kkt_on_random_general_qps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(2..=10);
        let rank = rng.random_range(0..=n);
        let f = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
        let q = &f * f.transpose();
        let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let m = rng.random_range(1..=6);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let x_feas = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0));
        let b = &a * &x_feas - DVector::from_fn(m, |_, _| rng.random_range(0.0..0.5));
        let p = QpProblem::new(q, c)
            .with_inequalities(a, b)
            .with_bounds(DVector::zeros(n), DVector::from_element(n, 2.0));
        let s = solve_qp(&p).unwrap();
        assert_kkt(&p, &s);
        assert!((s.objective - p.objective(&s.x)).abs() <= 1e-9 * (1.0 + s.objective.abs()));
    }
}

proptest! {
    #[test]
    fn row_scaling_invariance(seed in 0u64..10_000, scale in prop::collection::vec(0.01f64..100.0, 4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 4;
        let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let q = &f * f.transpose() + DMatrix::identity(n, n) * 0.05;
        let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let a = DMatrix::from_fn(3, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(3, |_, _| rng.random_range(-1.0..0.0));
        let base = QpProblem::new(q.clone(), c.clone())
            .with_equalities(dmatrix![1.0, 1.0, 1.0, 1.0], dvector![1.0])
            .with_inequalities(a.clone(), b.clone());
        let mut a2 = a.clone();
        let mut b2 = b.clone();
        for i in 0..3 {
            a2.row_mut(i).scale_mut(scale[i]);
            b2[i] *= scale[i];
        }
        let scaled = QpProblem::new(q, c)
            .with_equalities(dmatrix![1.0, 1.0, 1.0, 1.0] * scale[3], dvector![scale[3]])
            .with_inequalities(a2, b2);
        let s1 = solve_qp(&base).unwrap();
        let s2 = solve_qp(&scaled).unwrap();
        prop_assert_eq!(s1.status, s2.status);
        if s1.is_optimal() {
            prop_assert!((&s1.x - &s2.x).amax() <= 1e-8);
        }
    }
}
