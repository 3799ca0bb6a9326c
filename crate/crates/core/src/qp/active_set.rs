//! Primal active-set iterations.
//!
//! General rows are normalized to unit infinity norm before solving, which makes the
//! iterates invariant to positive row scaling. Bounds are handled by fixing variables, so
//! the working-set linear algebra only involves the free columns.

use nalgebra::{DMatrix, DVector, SymmetricEigen, QR};

use super::{Multipliers, QpError, QpProblem, QpSolution, QpStatus};

/// Iteration cap per phase, as a multiple of the variable count.
const ITERATIONS_PER_VAR: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Free,
    Lower,
    Upper,
    /// `lb == ub`; never released.
    Fixed,
}

/// Normalized problem data shared by both phases.
struct Model {
    q: DMatrix<f64>,
    c: DVector<f64>,
    /// All general rows, equalities first. Each row has unit infinity norm.
    rows: DMatrix<f64>,
    rhs: DVector<f64>,
    n_eq: usize,
    lb: DVector<f64>,
    ub: DVector<f64>,
}

impl Model {
    fn n(&self) -> usize {
        self.c.len()
    }

    fn m(&self) -> usize {
        self.rows.nrows()
    }

    fn slack(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.rows.row(i).transpose().dot(x) - self.rhs[i]
    }

    fn feas_tol(&self, i: usize) -> f64 {
        1e-9 * (1.0 + self.rhs[i].abs())
    }
}

struct Iterate {
    x: DVector<f64>,
    vars: Vec<Var>,
    active: Vec<bool>,
}

enum Outcome {
    Optimal { row_mult: Vec<f64>, var_mult: Vec<f64> },
    Unbounded { ray: DVector<f64> },
}

pub(super) fn solve(problem: &QpProblem) -> Result<QpSolution, QpError> {
    let n = problem.n_vars();
    let n_eq = problem.a_eq().nrows();
    let n_in = problem.a_in().nrows();
    let m = n_eq + n_in;

    let mut rows = DMatrix::zeros(m, n);
    let mut rhs = DVector::zeros(m);
    let mut row_scale = vec![1.0; m];
    for i in 0..m {
        let (row, b) = if i < n_eq {
            (problem.a_eq().row(i), problem.b_eq()[i])
        } else {
            (problem.a_in().row(i - n_eq), problem.b_in()[i - n_eq])
        };
        let s = row.amax();
        let s = if s > 0.0 { s } else { 1.0 };
        row_scale[i] = s;
        rows.row_mut(i).copy_from(&(row / s));
        rhs[i] = b / s;
    }
    let model = Model {
        q: problem.q().clone(),
        c: problem.c().clone(),
        rows,
        rhs,
        n_eq,
        lb: problem.lb().clone(),
        ub: problem.ub().clone(),
    };

    let mut iterations = 0;
    let x0 = DVector::from_fn(n, |j, _| 0.0f64.clamp(model.lb[j], model.ub[j]));
    let (x, phase1_iters, feasible) = phase_one(&model, x0)?;
    iterations += phase1_iters;

    let empty = Multipliers {
        eq: DVector::zeros(n_eq),
        ineq: DVector::zeros(n_in),
        lower: DVector::zeros(n),
        upper: DVector::zeros(n),
    };
    if !feasible {
        return Ok(QpSolution {
            objective: problem.objective(&x),
            max_violation: problem.max_violation(&x),
            x,
            status: QpStatus::Infeasible,
            multipliers: empty,
            ray: None,
            iterations,
        });
    }

    let mut it = initial_working_set(&model, x);
    let (outcome, phase2_iters) = iterate(&model, &mut it, ITERATIONS_PER_VAR * n.max(1))?;
    iterations += phase2_iters;
    let x = it.x;

    match outcome {
        Outcome::Unbounded { ray } => Ok(QpSolution {
            objective: problem.objective(&x),
            max_violation: problem.max_violation(&x),
            x,
            status: QpStatus::Unbounded,
            multipliers: empty,
            ray: Some(ray),
            iterations,
        }),
        Outcome::Optimal { row_mult, var_mult } => {
            let mut mult = empty;
            for i in 0..m {
                let v = row_mult[i] / row_scale[i];
                if i < n_eq {
                    mult.eq[i] = v;
                } else {
                    mult.ineq[i - n_eq] = v.max(0.0);
                }
            }
            for j in 0..n {
                let r = var_mult[j];
                match it.vars[j] {
                    Var::Lower => mult.lower[j] = r.max(0.0),
                    Var::Upper => mult.upper[j] = (-r).max(0.0),
                    Var::Fixed => {
                        mult.lower[j] = r.max(0.0);
                        mult.upper[j] = (-r).max(0.0);
                    }
                    Var::Free => {}
                }
            }
            Ok(QpSolution {
                objective: problem.objective(&x),
                max_violation: problem.max_violation(&x),
                x,
                status: QpStatus::Optimal,
                multipliers: mult,
                ray: None,
                iterations,
            })
        }
    }
}

/// Finds a feasible point by minimizing the sum of artificial variables attached to the
/// rows violated at `x0`. Returns the point, the iteration count and whether the artificial
/// sum reached zero.
fn phase_one(model: &Model, x0: DVector<f64>) -> Result<(DVector<f64>, usize, bool), QpError> {
    let n = model.n();
    let m = model.m();
    // (row, sign) for each artificial: row + sign * t (= or >=) rhs
    let mut artificials = Vec::new();
    let mut start = Vec::new();
    for i in 0..m {
        let r = -model.slack(i, &x0);
        if r.abs() <= model.feas_tol(i) || (i >= model.n_eq && r < 0.0) {
            continue;
        }
        artificials.push((i, r.signum()));
        start.push(r.abs());
    }
    if artificials.is_empty() {
        return Ok((x0, 0, true));
    }

    let n1 = n + artificials.len();
    let mut rows = model.rows.clone().resize_horizontally(n1, 0.0);
    for (k, &(i, sign)) in artificials.iter().enumerate() {
        rows[(i, n + k)] = sign;
    }
    let aux = Model {
        q: DMatrix::zeros(n1, n1),
        c: DVector::from_fn(n1, |j, _| if j < n { 0.0 } else { 1.0 }),
        rows,
        rhs: model.rhs.clone(),
        n_eq: model.n_eq,
        lb: DVector::from_fn(n1, |j, _| if j < n { model.lb[j] } else { 0.0 }),
        ub: DVector::from_fn(n1, |j, _| if j < n { model.ub[j] } else { f64::INFINITY }),
    };
    let x_aux = DVector::from_fn(n1, |j, _| if j < n { x0[j] } else { start[j - n] });
    let mut it = initial_working_set(&aux, x_aux);
    let (outcome, iters) = iterate(&aux, &mut it, ITERATIONS_PER_VAR * n1)?;
    debug_assert!(matches!(outcome, Outcome::Optimal { .. }));

    let residual: f64 = it.x.rows(n, n1 - n).iter().sum();
    let tol = 1e-8 * (1.0 + model.rhs.amax());
    Ok((it.x.rows(0, n).into_owned(), iters, residual <= tol))
}

/// Rank test on the active rows restricted to the free columns.
fn full_row_rank(model: &Model, active: &[usize], vars: &[Var]) -> bool {
    let free: Vec<usize> = (0..model.n()).filter(|&j| vars[j] == Var::Free).collect();
    if active.len() > free.len() {
        return false;
    }
    if active.is_empty() {
        return true;
    }
    let a = DMatrix::from_fn(active.len(), free.len(), |r, c| model.rows[(active[r], free[c])]);
    a.rank(1e-9) == active.len()
}

/// Greedy, linearly independent working set at a (near-)feasible point: equalities, then
/// bounds, then inequalities that hold with equality.
fn initial_working_set(model: &Model, mut x: DVector<f64>) -> Iterate {
    let n = model.n();
    let mut vars: Vec<Var> = (0..n)
        .map(|j| if model.lb[j] == model.ub[j] { Var::Fixed } else { Var::Free })
        .collect();
    for j in 0..n {
        if vars[j] == Var::Fixed {
            x[j] = model.lb[j];
        }
    }
    let mut active_list = Vec::new();
    for i in 0..model.n_eq {
        active_list.push(i);
        if !full_row_rank(model, &active_list, &vars) {
            active_list.pop();
        }
    }
    for j in 0..n {
        if vars[j] != Var::Free {
            continue;
        }
        let tol = 1e-9;
        let state = if model.lb[j].is_finite()
            && (x[j] - model.lb[j]).abs() <= tol * (1.0 + model.lb[j].abs())
        {
            Var::Lower
        } else if model.ub[j].is_finite()
            && (x[j] - model.ub[j]).abs() <= tol * (1.0 + model.ub[j].abs())
        {
            Var::Upper
        } else {
            continue;
        };
        vars[j] = state;
        if full_row_rank(model, &active_list, &vars) {
            x[j] = if state == Var::Lower { model.lb[j] } else { model.ub[j] };
        } else {
            vars[j] = Var::Free;
        }
    }
    for i in model.n_eq..model.m() {
        if model.slack(i, &x).abs() <= model.feas_tol(i) {
            active_list.push(i);
            if !full_row_rank(model, &active_list, &vars) {
                active_list.pop();
            }
        }
    }
    let mut active = vec![false; model.m()];
    for i in active_list {
        active[i] = true;
    }
    Iterate { x, vars, active }
}

/// Search direction on the current working set.
enum Step {
    /// Reduced gradient vanishes.
    Stationary,
    /// Zero-curvature descent direction; any step length is allowed.
    Ray(DVector<f64>),
    /// Minimizer of the model on the working-set subspace lies at step length 1.
    Newton(DVector<f64>),
}

fn iterate(model: &Model, it: &mut Iterate, max_iter: usize) -> Result<(Outcome, usize), QpError> {
    let n = model.n();
    let q_scale = model.q.amax();
    let mut last_full_newton = false;

    for iter in 1..=max_iter {
        let free: Vec<usize> = (0..n).filter(|&j| it.vars[j] == Var::Free).collect();
        let work: Vec<usize> = (0..model.m()).filter(|&i| it.active[i]).collect();
        let nf = free.len();
        let k = work.len();
        let g = &model.q * &it.x + &model.c;
        let g_free = DVector::from_fn(nf, |r, _| g[free[r]]);
        let g_scale = 1.0 + g.amax().max(model.c.amax());

        // A_w' on the free columns; its QR gives both the null space and the multipliers.
        let awt = DMatrix::from_fn(nf, k, |r, c| model.rows[(work[c], free[r])]);
        let qr = (k > 0).then(|| QR::new(awt.clone()));
        let z = match &qr {
            None => DMatrix::identity(nf, nf),
            Some(qr) => {
                let mut qt = DMatrix::identity(nf, nf);
                qr.q_tr_mul(&mut qt);
                qt.transpose().columns(k, nf - k).into_owned()
            }
        };

        let step = if nf == k {
            Step::Stationary
        } else {
            let gz = z.transpose() * &g_free;
            let q_ff = DMatrix::from_fn(nf, nf, |r, c| model.q[(free[r], free[c])]);
            let hz = z.transpose() * q_ff * &z;
            let dim = nf - k;
            let (vals, vecs) = if q_scale == 0.0 || hz.amax() == 0.0 {
                (DVector::zeros(dim), DMatrix::identity(dim, dim))
            } else {
                let eig = SymmetricEigen::new(hz);
                (eig.eigenvalues, eig.eigenvectors)
            };
            let curv_tol = 1e-11 * q_scale;
            let mut flat = DVector::zeros(dim);
            let mut newton = DVector::zeros(dim);
            for e in 0..dim {
                let v = vecs.column(e);
                let proj = v.dot(&gz);
                if vals[e] <= curv_tol {
                    flat += v * proj;
                } else {
                    newton += v * (proj / vals[e]);
                }
            }
            let tol = 1e-11 * g_scale;
            if flat.amax() > tol {
                Step::Ray(expand(&z, &free, n, &(-flat)))
            } else if gz.amax() <= tol || last_full_newton {
                Step::Stationary
            } else {
                Step::Newton(expand(&z, &free, n, &(-newton)))
            }
        };

        let (p, max_alpha) = match step {
            Step::Stationary => {
                let lambda = match &qr {
                    None => DVector::zeros(0),
                    Some(qr) => {
                        let rhs = qr.q().transpose() * &g_free;
                        qr.r().solve_upper_triangular(&rhs).unwrap_or_else(|| DVector::zeros(k))
                    }
                };
                let mut row_mult = vec![0.0; model.m()];
                for (r, &i) in work.iter().enumerate() {
                    row_mult[i] = lambda[r];
                }
                let mut var_mult = vec![0.0; n];
                for j in 0..n {
                    if it.vars[j] != Var::Free {
                        let s: f64 = work
                            .iter()
                            .zip(lambda.iter())
                            .map(|(&i, l)| l * model.rows[(i, j)])
                            .sum();
                        var_mult[j] = g[j] - s;
                    }
                }

                // Most negative sign-constrained multiplier; rows before bounds, lowest
                // index on ties.
                let tol = 1e-10 * g_scale;
                let mut drop: Option<(f64, usize)> = None;
                let consider = |drop: &mut Option<(f64, usize)>, value: f64, idx: usize| {
                    if value < -tol && drop.is_none_or(|(best, _)| value < best) {
                        *drop = Some((value, idx));
                    }
                };
                for &i in work.iter().filter(|&&i| i >= model.n_eq) {
                    consider(&mut drop, row_mult[i], i);
                }
                for j in 0..n {
                    match it.vars[j] {
                        Var::Lower => consider(&mut drop, var_mult[j], model.m() + j),
                        Var::Upper => consider(&mut drop, -var_mult[j], model.m() + j),
                        _ => {}
                    }
                }
                match drop {
                    None => return Ok((Outcome::Optimal { row_mult, var_mult }, iter)),
                    Some((_, idx)) if idx < model.m() => it.active[idx] = false,
                    Some((_, idx)) => it.vars[idx - model.m()] = Var::Free,
                }
                last_full_newton = false;
                continue;
            }
            Step::Ray(p) => (p, f64::INFINITY),
            Step::Newton(p) => (p, 1.0),
        };

        // Ratio test; rows before bounds, lowest index on ties.
        let dir_tol = 1e-12 * p.amax();
        let mut alpha = max_alpha;
        let mut blocking: Option<usize> = None;
        for i in model.n_eq..model.m() {
            if it.active[i] {
                continue;
            }
            let ap = model.rows.row(i).transpose().dot(&p);
            if ap < -dir_tol {
                let a = model.slack(i, &it.x).max(0.0) / -ap;
                if a < alpha {
                    alpha = a;
                    blocking = Some(i);
                }
            }
        }
        for &j in &free {
            let a = if p[j] < -dir_tol && model.lb[j].is_finite() {
                (it.x[j] - model.lb[j]).max(0.0) / -p[j]
            } else if p[j] > dir_tol && model.ub[j].is_finite() {
                (model.ub[j] - it.x[j]).max(0.0) / p[j]
            } else {
                continue;
            };
            if a < alpha {
                alpha = a;
                blocking = Some(model.m() + j);
            }
        }

        if alpha.is_infinite() {
            let norm = p.norm();
            return Ok((Outcome::Unbounded { ray: p / norm }, iter));
        }
        it.x.axpy(alpha, &p, 1.0);
        last_full_newton = blocking.is_none();
        match blocking {
            None => {}
            Some(i) if i < model.m() => it.active[i] = true,
            Some(idx) => {
                let j = idx - model.m();
                if p[j] < 0.0 {
                    it.vars[j] = Var::Lower;
                    it.x[j] = model.lb[j];
                } else {
                    it.vars[j] = Var::Upper;
                    it.x[j] = model.ub[j];
                }
            }
        }
    }
    Err(QpError::IterationLimit(max_iter))
}

/// Lifts a null-space step to a full-length direction that is zero on fixed variables.
fn expand(z: &DMatrix<f64>, free: &[usize], n: usize, pz: &DVector<f64>) -> DVector<f64> {
    let pf = z * pz;
    let mut p = DVector::zeros(n);
    for (r, &j) in free.iter().enumerate() {
        p[j] = pf[r];
    }
    p
}
