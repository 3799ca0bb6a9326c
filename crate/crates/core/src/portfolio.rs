//! Long-only Sharpe maximization and efficient frontier (`w >= 0`, `1'w = 1`).
//!
//! The Sharpe ratio is maximized through the homogenized program
//!
//! ```text
//! minimize y'Sy  subject to  (e - rf 1)'y = 1,  y >= 0
//! ```
//!
//! whose solution, normalized to `w = y / 1'y`, is the global long-only maximum whenever some
//! asset beats the riskless rate.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::exec::Execution;
use crate::market::AssetStats;
use crate::markowitz::PortfolioWeights;
use crate::qp::{solve_qp, QpError, QpProblem, QpSolution, QpStatus};

/// Weights below this are reported as exactly zero.
pub const WEIGHT_DUST: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PortfolioError {
    #[error("no asset beats the riskless rate {0}")]
    NoPositiveExcess(f64),
    #[error("a zero-variance long-only portfolio beats the riskless rate; Sharpe ratio is unbounded")]
    ZeroVariance,
    #[error("target mean {target} exceeds the largest expected return {max}")]
    TargetUnattainable { target: f64, max: f64 },
    #[error("need at least 2 frontier points, got {0}")]
    TooFewPoints(usize),
    #[error("QP solver returned status {0:?}")]
    NotOptimal(QpStatus),
    #[error(transparent)]
    Solver(#[from] QpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub mu_target: f64,
    /// Achieved mean, at least `mu_target`.
    pub mean: f64,
    pub variance: f64,
    pub weights: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedFrontier {
    /// Ascending in `mu_target`.
    pub points: Vec<FrontierPoint>,
    pub gmv_point: FrontierPoint,
}

fn optimal(sol: QpSolution) -> Result<QpSolution, PortfolioError> {
    if sol.is_optimal() {
        Ok(sol)
    } else {
        Err(PortfolioError::NotOptimal(sol.status))
    }
}

fn is_singular(q: &DMatrix<f64>) -> bool {
    let eig = q.clone().symmetric_eigenvalues();
    eig.min() <= 1e-12 * eig.max().max(f64::MIN_POSITIVE)
}

/// With a singular `Q` the optimal face of `min x'Qx` can contain more than one point; picks
/// its minimum-norm element so that interchangeable assets share weight equally.
fn center_on_optimal_face(problem: &QpProblem, sol: QpSolution) -> Result<QpSolution, PortfolioError> {
    if !is_singular(problem.q()) {
        return Ok(sol);
    }
    let n = problem.n_vars();
    let a_eq = DMatrix::from_fn(problem.a_eq().nrows() + n, n, |r, c| {
        if r < problem.a_eq().nrows() {
            problem.a_eq()[(r, c)]
        } else {
            problem.q()[(r - problem.a_eq().nrows(), c)]
        }
    });
    let qx = problem.q() * &sol.x;
    let b_eq = DVector::from_iterator(
        a_eq.nrows(),
        problem.b_eq().iter().copied().chain(qx.iter().copied()),
    );
    let centered = QpProblem::new(DMatrix::identity(n, n), DVector::zeros(n))
        .with_equalities(a_eq, b_eq)
        .with_inequalities(problem.a_in().clone(), problem.b_in().clone())
        .with_bounds(problem.lb().clone(), problem.ub().clone());
    match solve_qp(&centered) {
        Ok(c) if c.is_optimal() && problem.objective(&c.x) <= sol.objective * (1.0 + 1e-9) + 1e-15 => {
            Ok(c)
        }
        _ => Ok(sol),
    }
}

fn clamp_dust(w: &mut DVector<f64>) {
    for v in w.iter_mut() {
        if *v < WEIGHT_DUST {
            *v = 0.0;
        }
    }
}

/// Long-only portfolio with the highest Sharpe ratio against `r_f`.
pub fn max_sharpe_long_only(stats: &AssetStats, r_f: f64) -> Result<PortfolioWeights, PortfolioError> {
    let n = stats.n_assets();
    let excess = stats.mu().add_scalar(-r_f);
    if excess.iter().all(|&x| x <= 0.0) {
        return Err(PortfolioError::NoPositiveExcess(r_f));
    }
    let problem = QpProblem::new(stats.sigma() * 2.0, DVector::zeros(n))
        .with_equalities(DMatrix::from_row_slice(1, n, excess.as_slice()), DVector::from_element(1, 1.0))
        .with_bounds(DVector::zeros(n), DVector::from_element(n, f64::INFINITY));
    let sol = optimal(solve_qp(&problem)?)?;
    if sol.objective <= 1e-14 * stats.sigma().amax() {
        return Err(PortfolioError::ZeroVariance);
    }
    let sol = center_on_optimal_face(&problem, sol)?;

    let mut w = &sol.x / sol.x.sum();
    clamp_dust(&mut w);
    let total = w.sum();
    w /= total;
    Ok(PortfolioWeights::from_weights(stats, w, r_f))
}

fn min_variance_problem(stats: &AssetStats, mu_target: Option<f64>) -> QpProblem {
    let n = stats.n_assets();
    let mut p = QpProblem::new(stats.sigma() * 2.0, DVector::zeros(n))
        .with_equalities(DMatrix::from_element(1, n, 1.0), DVector::from_element(1, 1.0))
        .with_bounds(DVector::zeros(n), DVector::from_element(n, f64::INFINITY));
    if let Some(mu) = mu_target {
        p = p.with_inequalities(DMatrix::from_row_slice(1, n, stats.mu().as_slice()), DVector::from_element(1, mu));
    }
    p
}

fn frontier_point(stats: &AssetStats, mu_target: Option<f64>) -> Result<FrontierPoint, PortfolioError> {
    let problem = min_variance_problem(stats, mu_target);
    let sol = optimal(solve_qp(&problem)?)?;
    let sol = center_on_optimal_face(&problem, sol)?;
    let weights = sol.x;
    let mean = stats.mu().dot(&weights);
    let variance = weights.dot(&(stats.sigma() * &weights)).max(0.0);
    Ok(FrontierPoint {
        mu_target: mu_target.unwrap_or(mean),
        mean,
        variance,
        weights,
    })
}

/// Long-only global minimum-variance portfolio.
pub fn long_only_gmv(stats: &AssetStats) -> Result<FrontierPoint, PortfolioError> {
    frontier_point(stats, None)
}

/// Minimum-variance long-only portfolio with mean at least `mu_target`.
pub fn min_variance_at_return(stats: &AssetStats, mu_target: f64) -> Result<FrontierPoint, PortfolioError> {
    let max = stats.mu().max();
    if mu_target > max + 1e-12 * (1.0 + max.abs()) {
        return Err(PortfolioError::TargetUnattainable { target: mu_target, max });
    }
    frontier_point(stats, Some(mu_target.min(max)))
}

pub fn trace_frontier(stats: &AssetStats, n_points: usize) -> Result<ConstrainedFrontier, PortfolioError> {
    trace_frontier_with(stats, n_points, Execution::default())
}

/// Evenly spaced targets from the long-only GMV mean to the largest expected return. When
/// the two coincide the frontier is the single GMV point.
pub fn trace_frontier_with(
    stats: &AssetStats,
    n_points: usize,
    exec: Execution,
) -> Result<ConstrainedFrontier, PortfolioError> {
    if n_points < 2 {
        return Err(PortfolioError::TooFewPoints(n_points));
    }
    let gmv = long_only_gmv(stats)?;
    let hi = stats.mu().max();
    let lo = gmv.mean.min(hi);
    if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
        return Ok(ConstrainedFrontier {
            points: vec![gmv.clone()],
            gmv_point: gmv,
        });
    }
    let targets = frontier_grid(lo, hi, n_points);
    let points = exec
        .map_indexed(n_points, |i| min_variance_at_return(stats, targets[i]))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ConstrainedFrontier {
        points,
        gmv_point: gmv,
    })
}

fn frontier_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}
