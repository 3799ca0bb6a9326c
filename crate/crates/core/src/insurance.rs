//! Insurance valuation under a constant hazard rate.
//!
//! The strike time `T` is driven by a standard normal latent variable `Y` through
//! `P[T <= t] = F(t) = Phi(y)` with `F(t) = 1 - exp(-h t)`, so `T = -ln(1 - Phi(Y)) / h`.
//! Monte-Carlo draws of `Y` use inverse-CDF sampling from a seeded ChaCha8 generator, one
//! independent stream per block of [`CHUNK`] draws; estimates are identical across
//! [`Execution`] modes.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::{erfc, erfc_inv};
use thiserror::Error;

use crate::exec::Execution;

/// Draws per RNG stream.
pub const CHUNK: usize = 4096;

/// Normal generation method recorded alongside estimates.
pub const SAMPLER: &str = "inverse-cdf normal, ChaCha8 stream per 4096-draw block";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InsuranceError {
    #[error("invalid hazard model: {0}")]
    InvalidModel(String),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("need at least one Monte-Carlo draw")]
    NoDraws,
}

/// Exponential strike-time model. Money is in thousands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazardModel {
    /// Hazard rate per year.
    pub h: f64,
    /// Utility discount rate per year.
    pub r: f64,
    /// Lump sum paid at the strike event, per insurance unit.
    pub lump_sum: f64,
    /// Yearly spread payment per insurance unit.
    pub spread: f64,
    pub horizon: u32,
}

impl HazardModel {
    pub fn new(h: f64, r: f64, lump_sum: f64, spread: f64, horizon: u32) -> Result<Self, InsuranceError> {
        let model = Self { h, r, lump_sum, spread, horizon };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), InsuranceError> {
        let bad = |msg: &str| Err(InsuranceError::InvalidModel(msg.to_owned()));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("hazard rate must be positive and finite");
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return bad("discount rate must be nonnegative and finite");
        }
        if !(self.lump_sum >= 0.0 && self.lump_sum.is_finite()) {
            return bad("lump sum must be nonnegative and finite");
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return bad("spread must be nonnegative and finite");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least one year");
        }
        Ok(())
    }

    /// Strike-time CDF `F(t) = 1 - exp(-h t)`.
    pub fn strike_cdf(&self, t: f64) -> f64 {
        -(-self.h * t).exp_m1()
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_draws: usize,
    pub seed: u64,
}

pub fn standard_normal_cdf(y: f64) -> f64 {
    0.5 * erfc(-y / std::f64::consts::SQRT_2)
}

pub fn standard_normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// `T = -ln(1 - Phi(y)) / h`, with `1 - Phi(y)` evaluated as `Phi(-y)` to keep precision in
/// the upper tail.
pub fn strike_time_from_latent(y: f64, h: f64) -> f64 {
    -standard_normal_cdf(-y).ln() / h
}

/// Probability that the strike event has not happened by `t`, `exp(-h t)`.
pub fn survival_prob(model: &HazardModel, t: f64) -> Result<f64, InsuranceError> {
    if t < 0.0 || t.is_nan() {
        return Err(InsuranceError::NegativeTime(t));
    }
    Ok((-model.h * t).exp())
}

/// Closed form of `E[exp(-r T)]` for exponential `T`: `h / (h + r)`.
pub fn analytic_discount_factor(model: &HazardModel) -> f64 {
    model.h / (model.h + model.r)
}

/// Per-block sums of `f(T)` and `f(T)^2`.
fn chunked_moments<F>(model: &HazardModel, n_draws: usize, seed: u64, exec: Execution, f: F) -> (f64, f64)
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let n_chunks = n_draws.div_ceil(CHUNK);
    let partial = exec.map_indexed(n_chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let len = CHUNK.min(n_draws - c * CHUNK);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let u: f64 = rng.sample(Open01);
            let v = f(strike_time_from_latent(standard_normal_quantile(u), model.h));
            s1 += v;
            s2 += v * v;
        }
        (s1, s2)
    });
    partial
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d))
}

fn estimate<F>(
    model: &HazardModel,
    n_draws: usize,
    seed: u64,
    exec: Execution,
    f: F,
) -> Result<McEstimate, InsuranceError>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    model.validate()?;
    if n_draws == 0 {
        return Err(InsuranceError::NoDraws);
    }
    let (s1, s2) = chunked_moments(model, n_draws, seed, exec, f);
    let n = n_draws as f64;
    let value = s1 / n;
    let std_error = if n_draws > 1 {
        let var = ((s2 - n * value * value) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        value,
        std_error,
        n_draws,
        seed,
    })
}

/// Strike times for the first `n_draws` latent draws of `seed`.
pub fn sample_strike_times(model: &HazardModel, n_draws: usize, seed: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_draws);
    for c in 0..n_draws.div_ceil(CHUNK) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        for _ in 0..CHUNK.min(n_draws - c * CHUNK) {
            let u: f64 = rng.sample(Open01);
            out.push(strike_time_from_latent(standard_normal_quantile(u), model.h));
        }
    }
    out
}

/// Monte-Carlo estimate of `E[exp(-r T)]`.
pub fn estimate_discount_factor(model: &HazardModel, n_draws: usize, seed: u64) -> Result<McEstimate, InsuranceError> {
    estimate_discount_factor_with(model, n_draws, seed, Execution::default())
}

pub fn estimate_discount_factor_with(
    model: &HazardModel,
    n_draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate, InsuranceError> {
    let r = model.r;
    estimate(model, n_draws, seed, exec, move |t| (-r * t).exp())
}

/// Monte-Carlo mean strike time.
pub fn estimate_mean_strike_time(model: &HazardModel, n_draws: usize, seed: u64) -> Result<McEstimate, InsuranceError> {
    estimate(model, n_draws, seed, Execution::default(), |t| t)
}

/// `ceil` of the Monte-Carlo mean strike time: the year the income drop is assumed to
/// happen.
pub fn expected_strike_year(model: &HazardModel, n_draws: usize, seed: u64) -> Result<u32, InsuranceError> {
    let mean = estimate_mean_strike_time(model, n_draws, seed)?.value;
    Ok((mean.ceil() as u32).max(1))
}

/// `ceil(1 / h)`, the large-sample limit of [`expected_strike_year`].
pub fn analytic_strike_year(model: &HazardModel) -> u32 {
    // guard against 1/h landing a hair above an integer
    ((1.0 / model.h - 1e-9).ceil() as u32).max(1)
}

fn survival_sum(model: &HazardModel) -> f64 {
    (1..=model.horizon).map(|i| (-model.h * f64::from(i)).exp()).sum()
}

/// Linear utility per insurance unit, `V L - s sum_{i=1..M} (1 - F(i))`, using the analytic
/// `V`.
pub fn spread_linear_coefficient(model: &HazardModel) -> f64 {
    spread_linear_coefficient_with(model, analytic_discount_factor(model))
}

/// As [`spread_linear_coefficient`] with a caller-supplied discount factor (for example a
/// Monte-Carlo estimate).
pub fn spread_linear_coefficient_with(model: &HazardModel, discount_factor: f64) -> f64 {
    discount_factor * model.lump_sum - model.spread * survival_sum(model)
}

/// Variance of the spread payments per unit squared, `s^2 sum_{i=1..M} F(i) (1 - F(i))`.
pub fn spread_variance_coefficient(model: &HazardModel) -> f64 {
    let sum: f64 = (1..=model.horizon)
        .map(|i| {
            let f = model.strike_cdf(f64::from(i));
            f * (1.0 - f)
        })
        .sum();
    model.spread * model.spread * sum
}
