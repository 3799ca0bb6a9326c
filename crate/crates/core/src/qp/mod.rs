//! Dense convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//! minimize    1/2 x'Qx + c'x
//! subject to  A_eq x  = b_eq
//!             A_in x >= b_in
//!             lb <= x <= ub
//! ```
//!
//! with `Q` symmetric positive semidefinite. [`solve_qp`] runs a phase-1 feasibility LP
//! followed by a primal active-set method. Reduced Hessians may be singular: along zero
//! curvature directions the method moves to the nearest blocking constraint, and reports
//! [`QpStatus::Unbounded`] when there is none.

mod active_set;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Q is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("lower bound exceeds upper bound for variable {0}")]
    InvertedBounds(usize),
    #[error("non-finite problem data: {0}")]
    NonFinite(&'static str),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}

/// Immutable convex QP. Build with [`QpProblem::new`] and the `with_*` methods.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    q: DMatrix<f64>,
    c: DVector<f64>,
    a_eq: DMatrix<f64>,
    b_eq: DVector<f64>,
    a_in: DMatrix<f64>,
    b_in: DVector<f64>,
    lb: DVector<f64>,
    ub: DVector<f64>,
}

impl QpProblem {
    /// Unconstrained problem `min 1/2 x'Qx + c'x`.
    pub fn new(q: DMatrix<f64>, c: DVector<f64>) -> Self {
        let n = c.len();
        Self {
            q,
            c,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
            lb: DVector::from_element(n, f64::NEG_INFINITY),
            ub: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    /// Rows read `a x >= b`.
    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn with_bounds(mut self, lb: DVector<f64>, ub: DVector<f64>) -> Self {
        self.lb = lb;
        self.ub = ub;
        self
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn a_eq(&self) -> &DMatrix<f64> {
        &self.a_eq
    }

    pub fn b_eq(&self) -> &DVector<f64> {
        &self.b_eq
    }

    pub fn a_in(&self) -> &DMatrix<f64> {
        &self.a_in
    }

    pub fn b_in(&self) -> &DVector<f64> {
        &self.b_in
    }

    pub fn lb(&self) -> &DVector<f64> {
        &self.lb
    }

    pub fn ub(&self) -> &DVector<f64> {
        &self.ub
    }

    /// `1/2 x'Qx + c'x`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    /// Same objective and constraints with `Q` and `c` negated.
    pub fn negated(&self) -> Self {
        Self {
            q: -&self.q,
            c: -&self.c,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.n_vars();
        let dim = |what: &str, got: (usize, usize), want: (usize, usize)| {
            if got == want {
                Ok(())
            } else {
                Err(QpError::Dimension(format!(
                    "{what} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )))
            }
        };
        dim("Q", self.q.shape(), (n, n))?;
        dim("A_eq", self.a_eq.shape(), (self.b_eq.len(), n))?;
        dim("A_in", self.a_in.shape(), (self.b_in.len(), n))?;
        dim("lb", (self.lb.len(), 1), (n, 1))?;
        dim("ub", (self.ub.len(), 1), (n, 1))?;

        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !finite(&self.q) || !self.c.iter().all(|v| v.is_finite()) {
            return Err(QpError::NonFinite("objective"));
        }
        if !finite(&self.a_eq)
            || !finite(&self.a_in)
            || !self.b_eq.iter().chain(self.b_in.iter()).all(|v| v.is_finite())
        {
            return Err(QpError::NonFinite("constraints"));
        }
        if self.lb.iter().any(|v| v.is_nan() || *v == f64::INFINITY)
            || self.ub.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY)
        {
            return Err(QpError::NonFinite("bounds"));
        }
        let asym = (&self.q - self.q.transpose()).amax();
        if asym > 1e-12 * self.q.amax().max(1.0) {
            return Err(QpError::Asymmetric(asym));
        }
        if let Some(j) = (0..n).find(|&j| self.lb[j] > self.ub[j]) {
            return Err(QpError::InvertedBounds(j));
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x` (zero when feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let eq = (&self.a_eq * x - &self.b_eq).amax();
        let ineq = (&self.b_in - &self.a_in * x).iter().fold(0.0f64, |m, v| m.max(*v));
        let bounds = (0..x.len()).fold(0.0f64, |m, j| {
            m.max(self.lb[j] - x[j]).max(x[j] - self.ub[j])
        });
        eq.max(ineq).max(bounds)
    }

    /// `1 + max |b|` over all right-hand sides and finite bounds.
    pub fn rhs_scale(&self) -> f64 {
        let finite_bounds = self
            .lb
            .iter()
            .chain(self.ub.iter())
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        1.0 + self.b_eq.amax().max(self.b_in.amax()).max(finite_bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Lagrange multipliers in the convention `Qx + c = A_eq'eq + A_in'ineq + lower - upper`,
/// with `ineq, lower, upper >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub eq: DVector<f64>,
    pub ineq: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Objective at `x`, in the sense of the call (minimization for [`solve_qp`]).
    pub objective: f64,
    pub status: QpStatus,
    pub max_violation: f64,
    /// Meaningful when `status` is optimal.
    pub multipliers: Multipliers,
    /// Feasible direction of unbounded descent, when `status` is unbounded.
    pub ray: Option<DVector<f64>>,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// KKT diagnostics of a candidate solution to the minimization problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `||Qx + c - A'multipliers||_inf / (1 + ||c||_inf)`.
    pub stationarity: f64,
    /// Largest `multiplier * slack` over inequalities and bounds, scaled like the stationarity.
    pub complementarity: f64,
    /// Most negative sign-constrained multiplier (zero when all are nonnegative).
    pub dual_infeasibility: f64,
    pub primal_violation: f64,
}

pub fn kkt_report(problem: &QpProblem, x: &DVector<f64>, m: &Multipliers) -> KktReport {
    let grad = problem.q() * x + problem.c();
    let resid =
        &grad - problem.a_eq().transpose() * &m.eq - problem.a_in().transpose() * &m.ineq
            - &m.lower
            + &m.upper;
    let scale = 1.0 + problem.c().amax();
    let mut comp = 0.0f64;
    let slack_in = problem.a_in() * x - problem.b_in();
    for i in 0..slack_in.len() {
        comp = comp.max((m.ineq[i] * slack_in[i]).abs());
    }
    for j in 0..x.len() {
        if m.lower[j] != 0.0 {
            comp = comp.max((m.lower[j] * (x[j] - problem.lb()[j])).abs());
        }
        if m.upper[j] != 0.0 {
            comp = comp.max((m.upper[j] * (problem.ub()[j] - x[j])).abs());
        }
    }
    let dual = m
        .ineq
        .iter()
        .chain(m.lower.iter())
        .chain(m.upper.iter())
        .fold(0.0f64, |acc, v| acc.min(*v));
    KktReport {
        stationarity: resid.amax() / scale,
        complementarity: comp / scale,
        dual_infeasibility: dual,
        primal_violation: problem.max_violation(x),
    }
}

/// Minimizes `1/2 x'Qx + c'x` over the feasible set.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution, QpError> {
    problem.validate()?;
    active_set::solve(problem)
}

/// Maximizes `c'x + 1/2 x'Qx` for negative semidefinite `Q`.
///
/// Solves the negated minimization. The reported objective is in the maximization sense;
/// multipliers are those of the negated problem.
pub fn solve_qp_maximize(problem: &QpProblem) -> Result<QpSolution, QpError> {
    let mut sol = solve_qp(&problem.negated())?;
    sol.objective = -sol.objective;
    Ok(sol)
}

#[cfg(test)]
mod tests;
