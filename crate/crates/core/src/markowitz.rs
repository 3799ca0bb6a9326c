//! Closed-form mean-variance quantities when short sales are allowed.
//!
//! With `e` the expected returns and `S` the covariance matrix:
//!
//! ```text
//! A = 1' S^-1 e    B = e' S^-1 e    C = 1' S^-1 1
//! D = B C - A^2    H = B - 2 A rf + C rf^2
//! ```
//!
//! The tangency portfolio has Sharpe ratio `sqrt(H)` and the risky-only frontier is the
//! parabola `var(mu) = (C mu^2 - 2 A mu + B) / D`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::market::AssetStats;

/// Largest accepted eigenvalue ratio of the covariance matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkowitzError {
    #[error("covariance matrix is singular or near-singular (condition estimate {0:e})")]
    Singular(f64),
    #[error(
        "riskless rate {r_f} is not below the minimum-variance mean {gmv_mean}; \
         the tangency portfolio is not on the efficient branch"
    )]
    NotOnEfficientBranch { r_f: f64, gmv_mean: f64 },
    #[error("frontier is degenerate: D = {0:e} (expected returns collinear with the unit vector)")]
    DegenerateFrontier(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub h: f64,
    pub r_f: f64,
}

impl FrontierConstants {
    /// Mean of the global minimum-variance portfolio, `A / C`.
    pub fn gmv_mean(&self) -> f64 {
        self.a / self.c
    }

    /// Expected tangency return written as `A/C - D / (C^2 (rf - A/C))`.
    pub fn tangency_mean(&self) -> f64 {
        let ac = self.a / self.c;
        ac - self.d / (self.c * self.c * (self.r_f - ac))
    }

    /// The same quantity in rational form, `(B - A rf) / (A - C rf)`.
    pub fn tangency_mean_rational(&self) -> f64 {
        (self.b - self.a * self.r_f) / (self.a - self.c * self.r_f)
    }
}

/// A fully invested portfolio with its moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights {
    pub weights: DVector<f64>,
    pub mean: f64,
    pub variance: f64,
    /// `(mean - r_f) / sqrt(variance)`; infinite when the variance is zero.
    pub sharpe: f64,
    pub r_f: f64,
}

impl PortfolioWeights {
    pub fn from_weights(stats: &AssetStats, weights: DVector<f64>, r_f: f64) -> Self {
        let mean = stats.mu().dot(&weights);
        let variance = weights.dot(&(stats.sigma() * &weights)).max(0.0);
        let sharpe = sharpe_ratio(mean, variance, r_f);
        Self {
            weights,
            mean,
            variance,
            sharpe,
            r_f,
        }
    }
}

pub(crate) fn sharpe_ratio(mean: f64, variance: f64, r_f: f64) -> f64 {
    if variance > 0.0 {
        (mean - r_f) / variance.sqrt()
    } else {
        f64::INFINITY.copysign(mean - r_f)
    }
}

/// Cholesky factor of the covariance, refused when the eigenvalue ratio exceeds
/// [`MAX_CONDITION`].
fn factor(sigma: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, MarkowitzError> {
    let eig = sigma.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(MarkowitzError::Singular(condition));
    }
    Cholesky::new(sigma.clone()).ok_or(MarkowitzError::Singular(condition))
}

pub fn frontier_constants(stats: &AssetStats, r_f: f64) -> Result<FrontierConstants, MarkowitzError> {
    let chol = factor(stats.sigma())?;
    let n = stats.n_assets();
    let ones = DVector::from_element(n, 1.0);
    let inv_e = chol.solve(stats.mu());
    let inv_1 = chol.solve(&ones);
    let a = ones.dot(&inv_e);
    let b = stats.mu().dot(&inv_e);
    let c = ones.dot(&inv_1);
    let d = b * c - a * a;
    let h = b - 2.0 * a * r_f + c * r_f * r_f;
    Ok(FrontierConstants { a, b, c, d, h, r_f })
}

/// Maximum-Sharpe portfolio with unrestricted weights,
/// `w = S^-1 (e - rf 1) (E[r_M] - rf) / H`.
pub fn tangency_portfolio(stats: &AssetStats, r_f: f64) -> Result<PortfolioWeights, MarkowitzError> {
    let k = frontier_constants(stats, r_f)?;
    if !(r_f < k.gmv_mean()) || !(k.h > 0.0) {
        return Err(MarkowitzError::NotOnEfficientBranch {
            r_f,
            gmv_mean: k.gmv_mean(),
        });
    }
    let chol = factor(stats.sigma())?;
    let excess = stats.mu().add_scalar(-r_f);
    let scale = (k.tangency_mean() - r_f) / k.h;
    let weights = chol.solve(&excess) * scale;
    Ok(PortfolioWeights::from_weights(stats, weights, r_f))
}

/// Variance of the unconstrained risky frontier at mean `mu_target`.
pub fn unconstrained_frontier_variance(
    constants: &FrontierConstants,
    mu_target: f64,
) -> Result<f64, MarkowitzError> {
    let FrontierConstants { a, b, c, d, .. } = *constants;
    if !(d > 1e-14) {
        return Err(MarkowitzError::DegenerateFrontier(d));
    }
    Ok((c * mu_target * mu_target - 2.0 * a * mu_target + b) / d)
}
