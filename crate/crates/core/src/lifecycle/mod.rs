//! Lifetime investment plan over `M` years.
//!
//! Each year the investor chooses amounts to put in the risky fund, to borrow and to save,
//! whether to buy the house, and (once) how many insurance units to hold. The decision
//! vector has length `4M + 1`:
//!
//! ```text
//! [stock_1..stock_M, borrow_1..borrow_M, save_1..save_M, house_1..house_M, insurance]
//! ```
//!
//! The objective is discounted mean-variance utility `c'x + 1/2 x'Qx` with `Q = -2 B Q0`,
//! subject to a consumption floor `D_k >= d_floor` every year and at most one house purchase.
//! House binaries are handled by enumerating the purchase year; every branch is a convex QP.
//! All money is in thousands.

mod assemble;
mod solve;

use nalgebra::DVector;
use thiserror::Error;

use crate::insurance::{HazardModel, InsuranceError};
use crate::qp::QpError;

pub use assemble::{
    assemble_constraints, assemble_linear_coefficients, assemble_quadratic, house_payment_matrix,
    ConstraintSystem, HouseChoice, LifecycleModel,
};
pub use solve::{implied_consumption, resolve_discount_factor, resolve_kstart, solve_lifecycle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid lifecycle config: {0}")]
    InvalidConfig(String),
    #[error("invalid risky asset summary: {0}")]
    InvalidAsset(String),
    #[error(transparent)]
    Insurance(#[from] InsuranceError),
    #[error("QP failed for branch '{label}': {source}")]
    Branch {
        label: String,
        #[source]
        source: QpError,
    },
    #[error("branch '{0}' is unbounded")]
    Unbounded(String),
    #[error("no house-purchase branch admits a feasible plan")]
    Infeasible,
}

/// Which decision blocks may be nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instruments {
    pub stock: bool,
    pub borrow: bool,
    pub save: bool,
    pub house: bool,
    pub insurance: bool,
}

impl Default for Instruments {
    fn default() -> Self {
        Self {
            stock: true,
            borrow: true,
            save: true,
            house: true,
            insurance: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifecycleConfig {
    pub years: usize,
    /// Utility discount rate.
    pub discount_rate: f64,
    pub r_borrow: f64,
    pub r_save: f64,
    pub income_high: f64,
    /// Income after the strike event.
    pub income_low: f64,
    /// Minimum yearly consumption.
    pub d_floor: f64,
    pub initial_saving: f64,
    /// `B` in `E[D] - B var[D]`.
    pub risk_aversion: f64,
    pub house_initial: f64,
    pub house_annual: f64,
    /// Number of annual payments following the initial one.
    pub house_years: usize,
    /// Continuous growth rate of the initial house payment with the purchase year.
    pub house_growth: f64,
    /// Money-equivalent utility of owning the house.
    pub house_utility: f64,
    pub hazard_rate: f64,
    pub lump_sum: f64,
    pub spread: f64,
    pub instruments: Instruments,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        Self {
            years: 30,
            discount_rate: 0.03,
            r_borrow: 0.065,
            r_save: 0.025,
            income_high: 200.0,
            income_low: 10.0,
            d_floor: 10.0,
            initial_saving: 500.0,
            risk_aversion: 3.0,
            house_initial: 1800.0,
            house_annual: 150.0,
            house_years: 10,
            house_growth: 0.0,
            house_utility: 3500.0,
            hazard_rate: 0.06,
            lump_sum: 30.0,
            spread: 0.5,
            instruments: Instruments::default(),
        }
    }
}

impl LifecycleConfig {
    pub fn hazard_model(&self) -> HazardModel {
        HazardModel {
            h: self.hazard_rate,
            r: self.discount_rate,
            lump_sum: self.lump_sum,
            spread: self.spread,
            horizon: self.years as u32,
        }
    }

    /// Number of entries in the decision vector, `4M + 1`.
    pub fn n_vars(&self) -> usize {
        4 * self.years + 1
    }

    /// Last year in which the house may be bought.
    pub fn last_house_year(&self) -> usize {
        self.years - self.house_years
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |msg: String| Err(PlanError::InvalidConfig(msg));
        if self.years < 2 {
            return bad(format!("years must be at least 2, got {}", self.years));
        }
        if self.house_years >= self.years {
            return bad(format!(
                "house_years ({}) must be below years ({})",
                self.house_years, self.years
            ));
        }
        let values = [
            ("discount_rate", self.discount_rate),
            ("r_borrow", self.r_borrow),
            ("r_save", self.r_save),
            ("income_high", self.income_high),
            ("income_low", self.income_low),
            ("d_floor", self.d_floor),
            ("initial_saving", self.initial_saving),
            ("risk_aversion", self.risk_aversion),
            ("house_initial", self.house_initial),
            ("house_annual", self.house_annual),
            ("house_growth", self.house_growth),
            ("house_utility", self.house_utility),
        ];
        if let Some((name, _)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return bad(format!("{name} must be finite"));
        }
        if self.r_borrow < self.r_save {
            return bad(format!(
                "borrow rate {} is below save rate {}",
                self.r_borrow, self.r_save
            ));
        }
        if self.d_floor > self.income_low + self.initial_saving {
            return bad(format!(
                "consumption floor {} exceeds low income plus initial saving {}",
                self.d_floor,
                self.income_low + self.initial_saving
            ));
        }
        if self.risk_aversion < 0.0 {
            return bad("risk_aversion must be nonnegative".into());
        }
        self.hazard_model().validate()?;
        Ok(())
    }
}

/// The long-only fund collapsed to one annualized (mean, variance) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskyAssetSummary {
    pub r_stock: f64,
    pub var_stock: f64,
}

impl RiskyAssetSummary {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !self.r_stock.is_finite() || !self.var_stock.is_finite() || self.var_stock < 0.0 {
            return Err(PlanError::InvalidAsset(format!(
                "need finite return and nonnegative variance, got ({}, {})",
                self.r_stock, self.var_stock
            )));
        }
        Ok(())
    }
}

/// How the income-drop year is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KstartMode {
    /// `ceil(1 / h)`.
    Analytic,
    /// `ceil` of a Monte-Carlo mean strike time.
    MonteCarlo { draws: usize, seed: u64 },
}

/// Which value of `E[exp(-r T)]` prices the insurance lump sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscountMode {
    /// `h / (h + r)`.
    Analytic,
    MonteCarlo { draws: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanOptions {
    pub kstart: KstartMode,
    pub discount: DiscountMode,
    pub execution: crate::Execution,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            kstart: KstartMode::Analytic,
            discount: DiscountMode::Analytic,
            execution: crate::Execution::default(),
        }
    }
}

/// Decision vector with named views of its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    years: usize,
    values: DVector<f64>,
}

impl DecisionVector {
    pub fn new(years: usize, values: DVector<f64>) -> Self {
        assert_eq!(values.len(), 4 * years + 1, "decision vector length");
        Self { years, values }
    }

    pub fn years(&self) -> usize {
        self.years
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.values
    }

    fn block(&self, b: usize) -> &[f64] {
        &self.values.as_slice()[b * self.years..(b + 1) * self.years]
    }

    pub fn stock(&self) -> &[f64] {
        self.block(0)
    }

    pub fn borrow(&self) -> &[f64] {
        self.block(1)
    }

    pub fn save(&self) -> &[f64] {
        self.block(2)
    }

    pub fn house(&self) -> &[f64] {
        self.block(3)
    }

    pub fn insurance(&self) -> f64 {
        self.values[4 * self.years]
    }

    /// 1-based purchase year, if any binary is set.
    pub fn house_year(&self) -> Option<usize> {
        self.house().iter().position(|&b| b > 0.5).map(|i| i + 1)
    }
}

/// Result of one enumerated house branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutcome {
    pub house: HouseChoice,
    /// Optimal objective, `None` when the branch is infeasible.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifecyclePlan {
    pub decision: DecisionVector,
    pub house_year: Option<usize>,
    /// Objective recomputed from the reported (dust-free) decision.
    pub objective: f64,
    /// Implied consumption `D_1..D_M`.
    pub consumption: Vec<f64>,
    /// Largest violation of any assembled constraint or bound at the reported decision.
    pub feasibility_report: f64,
    /// First year with low income (`M + 1` when the drop falls outside the horizon).
    pub kstart: usize,
    pub discount_factor: f64,
    pub branches: Vec<BranchOutcome>,
}
