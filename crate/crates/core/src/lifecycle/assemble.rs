use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::{LifecycleConfig, RiskyAssetSummary};
use crate::insurance::{spread_linear_coefficient_with, spread_variance_coefficient};
use crate::qp::QpProblem;

fn discount(config: &LifecycleConfig, year: usize) -> f64 {
    (-(year as f64) * config.discount_rate).exp()
}

/// `M x M` matrix whose column `j` is the payment stream of buying the house in year `j`
/// (1-based): the initial payment in year `j`, then `house_annual` for `house_years` years,
/// truncated at the horizon.
pub fn house_payment_matrix(config: &LifecycleConfig) -> DMatrix<f64> {
    let m = config.years;
    let mut p = DMatrix::zeros(m, m);
    for j in 0..m {
        p[(j, j)] = config.house_initial * ((j + 1) as f64 * config.house_growth).exp();
        for k in j + 1..=(j + config.house_years).min(m - 1) {
            p[(k, j)] = config.house_annual;
        }
    }
    p
}

/// Linear part `c` of the maximization objective.
///
/// Stock, borrow and save amounts contribute their discounted effect on consumption this
/// year and next; in the final year each block carries `-exp(-M r)`. The house column `j`
/// is the discounted payment stream plus `exp(-j r) * house_utility`, and the insurance entry
/// is `V L - s sum (1 - F(i))`.
pub fn assemble_linear_coefficients(
    config: &LifecycleConfig,
    asset: &RiskyAssetSummary,
    discount_factor: f64,
) -> DVector<f64> {
    let m = config.years;
    let mut c = DVector::zeros(config.n_vars());
    let carry = |k: usize, gross: f64, sign: f64| {
        if k < m {
            sign * (-discount(config, k) + discount(config, k + 1) * gross)
        } else {
            -discount(config, k)
        }
    };
    for k in 1..=m {
        c[k - 1] = carry(k, 1.0 + asset.r_stock, 1.0);
        c[m + k - 1] = carry(k, 1.0 + config.r_borrow, -1.0);
        c[2 * m + k - 1] = carry(k, 1.0 + config.r_save, 1.0);
    }
    let payments = house_payment_matrix(config);
    for j in 0..m {
        let paid: f64 = (0..m).map(|k| discount(config, k + 1) * payments[(k, j)]).sum();
        c[3 * m + j] = -paid + discount(config, j + 1) * config.house_utility;
    }
    c[4 * m] = spread_linear_coefficient_with(&config.hazard_model(), discount_factor);
    c
}

/// Quadratic part: `Q = -2 B diag(var_stock (M times), 0 (3M times), s^2 sum F(1-F))`.
pub fn assemble_quadratic(config: &LifecycleConfig, asset: &RiskyAssetSummary) -> DMatrix<f64> {
    let m = config.years;
    let scale = -2.0 * config.risk_aversion;
    let mut q = DMatrix::zeros(config.n_vars(), config.n_vars());
    for k in 0..m {
        q[(k, k)] = scale * asset.var_stock;
    }
    q[(4 * m, 4 * m)] = scale * spread_variance_coefficient(&config.hazard_model());
    q
}

/// Rows `a x >= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Consumption-floor rows for years `1..=M` followed by the at-most-one-house row.
///
/// Row `k` reads `D_k - income_k >= d_floor - income_k` with the decision-dependent part of
/// `D_k` on the left. Income is `income_high` before `kstart` and `income_low` from `kstart`
/// on; the initial saving arrives in year 1. The insurance spread is paid only before
/// `kstart`.
pub fn assemble_constraints(
    config: &LifecycleConfig,
    asset: &RiskyAssetSummary,
    kstart: usize,
) -> ConstraintSystem {
    let m = config.years;
    let n = config.n_vars();
    let payments = house_payment_matrix(config);
    let mut a = DMatrix::zeros(m + 1, n);
    let mut b = DVector::zeros(m + 1);
    for k in 0..m {
        a[(k, k)] = -1.0;
        a[(k, m + k)] = 1.0;
        a[(k, 2 * m + k)] = -1.0;
        if k > 0 {
            a[(k, k - 1)] = 1.0 + asset.r_stock;
            a[(k, m + k - 1)] = -1.0 - config.r_borrow;
            a[(k, 2 * m + k - 1)] = 1.0 + config.r_save;
        }
        for j in 0..m {
            a[(k, 3 * m + j)] = -payments[(k, j)];
        }
        let year = k + 1;
        a[(k, 4 * m)] = if year < kstart { -config.spread } else { 0.0 };
        let income = if year < kstart { config.income_high } else { config.income_low };
        b[k] = config.d_floor - income;
    }
    b[0] -= config.initial_saving;
    for j in 0..m {
        a[(m, 3 * m + j)] = -1.0;
    }
    b[m] = -1.0;
    ConstraintSystem { a, b }
}

/// House decision of one enumeration branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HouseChoice {
    None,
    /// 1-based purchase year.
    Year(usize),
}

impl fmt::Display for HouseChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HouseChoice::None => write!(f, "no house"),
            HouseChoice::Year(y) => write!(f, "house in year {y}"),
        }
    }
}

/// Fully assembled lifecycle program; house binaries are fixed per branch through bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LifecycleModel {
    pub config: LifecycleConfig,
    pub kstart: usize,
    pub c: DVector<f64>,
    pub q: DMatrix<f64>,
    pub constraints: ConstraintSystem,
    /// Upper bounds with every house binary free to be 0 or 1 where admissible and all
    /// final-year positions closed.
    pub ub: DVector<f64>,
}

impl LifecycleModel {
    pub fn new(
        config: &LifecycleConfig,
        asset: &RiskyAssetSummary,
        kstart: usize,
        discount_factor: f64,
    ) -> Self {
        let m = config.years;
        let n = config.n_vars();
        let inst = config.instruments;
        let mut ub = DVector::from_element(n, f64::INFINITY);
        for k in 0..m {
            if !inst.stock {
                ub[k] = 0.0;
            }
            if !inst.borrow {
                ub[m + k] = 0.0;
            }
            if !inst.save {
                ub[2 * m + k] = 0.0;
            }
            ub[3 * m + k] = if inst.house && k < config.last_house_year() { 1.0 } else { 0.0 };
        }
        if !inst.insurance {
            ub[4 * m] = 0.0;
        }
        // Positions are closed in the final year. The negative final-year coefficients
        // usually do this on their own, but a final-year loan is never repaid inside the
        // horizon, so without the bound a binding last budget row would be met by borrowing.
        for block in 0..3 {
            ub[block * m + m - 1] = 0.0;
        }
        Self {
            config: *config,
            kstart,
            c: assemble_linear_coefficients(config, asset, discount_factor),
            q: assemble_quadratic(config, asset),
            constraints: assemble_constraints(config, asset, kstart),
            ub,
        }
    }

    /// Purchase options in enumeration order: no house first, then admissible years.
    pub fn house_choices(&self) -> Vec<HouseChoice> {
        let m = self.config.years;
        std::iter::once(HouseChoice::None)
            .chain((1..=m).filter(|&y| self.ub[3 * m + y - 1] > 0.0).map(HouseChoice::Year))
            .collect()
    }

    /// Continuous QP (maximization sense) with the house binaries fixed to `bits`, or `None`
    /// when a set bit falls in a year where purchase is not allowed.
    pub fn problem_for_bits(&self, bits: &[bool]) -> Option<QpProblem> {
        let m = self.config.years;
        assert_eq!(bits.len(), m, "one bit per year");
        let mut lb = DVector::zeros(self.c.len());
        let mut ub = self.ub.clone();
        for (k, &bit) in bits.iter().enumerate() {
            let v = if bit { 1.0 } else { 0.0 };
            if v > ub[3 * m + k] {
                return None;
            }
            lb[3 * m + k] = v;
            ub[3 * m + k] = v;
        }
        Some(
            QpProblem::new(self.q.clone(), self.c.clone())
                .with_inequalities(self.constraints.a.clone(), self.constraints.b.clone())
                .with_bounds(lb, ub),
        )
    }

    pub fn problem(&self, house: HouseChoice) -> Option<QpProblem> {
        let mut bits = vec![false; self.config.years];
        if let HouseChoice::Year(y) = house {
            *bits.get_mut(y.checked_sub(1)?)? = true;
        }
        self.problem_for_bits(&bits)
    }

    /// `c'x + 1/2 x'Qx`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(x) + 0.5 * x.dot(&(&self.q * x))
    }
}
