use nalgebra::DVector;

use super::{
    BranchOutcome, DecisionVector, DiscountMode, HouseChoice, KstartMode, LifecycleConfig,
    LifecycleModel, LifecyclePlan, PlanError, PlanOptions, RiskyAssetSummary,
};
use crate::insurance::{analytic_discount_factor, analytic_strike_year, estimate_discount_factor, expected_strike_year};
use crate::qp::{solve_qp_maximize, QpStatus};

/// Decision entries smaller than this in magnitude are reported as zero.
pub const DECISION_DUST: f64 = 1e-9;

/// Income-drop year, capped at `M + 1` (no drop within the horizon).
pub fn resolve_kstart(config: &LifecycleConfig, mode: KstartMode) -> Result<usize, PlanError> {
    let model = config.hazard_model();
    let year = match mode {
        KstartMode::Analytic => analytic_strike_year(&model),
        KstartMode::MonteCarlo { draws, seed } => expected_strike_year(&model, draws, seed)?,
    };
    Ok((year as usize).min(config.years + 1))
}

pub fn resolve_discount_factor(config: &LifecycleConfig, mode: DiscountMode) -> Result<f64, PlanError> {
    let model = config.hazard_model();
    Ok(match mode {
        DiscountMode::Analytic => analytic_discount_factor(&model),
        DiscountMode::MonteCarlo { draws, seed } => estimate_discount_factor(&model, draws, seed)?.value,
    })
}

/// Consumption `D_1..D_M` implied by a decision through the yearly budget identity.
pub fn implied_consumption(
    decision: &DecisionVector,
    config: &LifecycleConfig,
    asset: &RiskyAssetSummary,
    kstart: usize,
) -> Vec<f64> {
    let m = config.years;
    let (stock, borrow, save) = (decision.stock(), decision.borrow(), decision.save());
    let house_year = decision.house_year();
    (1..=m)
        .map(|year| {
            let k = year - 1;
            let mut d = if year < kstart { config.income_high } else { config.income_low };
            if year == 1 {
                d += config.initial_saving;
            }
            d += borrow[k] - stock[k] - save[k];
            if k > 0 {
                d += (1.0 + asset.r_stock) * stock[k - 1] + (1.0 + config.r_save) * save[k - 1]
                    - (1.0 + config.r_borrow) * borrow[k - 1];
            }
            if year < kstart {
                d -= config.spread * decision.insurance();
            }
            if let Some(h) = house_year {
                if year == h {
                    d -= config.house_initial * (h as f64 * config.house_growth).exp();
                } else if year > h && year <= h + config.house_years {
                    d -= config.house_annual;
                }
            }
            d
        })
        .collect()
}

/// Best plan over all house-purchase branches.
///
/// Each branch fixes the house binaries and solves the continuous QP. Ties keep the earlier
/// branch (no house first, then ascending purchase year).
pub fn solve_lifecycle(
    config: &LifecycleConfig,
    asset: &RiskyAssetSummary,
    options: &PlanOptions,
) -> Result<LifecyclePlan, PlanError> {
    config.validate()?;
    asset.validate()?;
    let kstart = resolve_kstart(config, options.kstart)?;
    let discount_factor = resolve_discount_factor(config, options.discount)?;
    let model = LifecycleModel::new(config, asset, kstart, discount_factor);
    let choices = model.house_choices();

    let solved = options.execution.map_indexed(choices.len(), |i| {
        let problem = model
            .problem(choices[i])
            .expect("enumerated house choices are admissible");
        solve_qp_maximize(&problem).map(|s| (problem, s))
    });

    let mut branches = Vec::with_capacity(choices.len());
    let mut best: Option<(usize, f64)> = None;
    let mut solutions = Vec::with_capacity(choices.len());
    for (i, (house, result)) in choices.iter().zip(solved).enumerate() {
        let (problem, sol) = result.map_err(|source| PlanError::Branch {
            label: house.to_string(),
            source,
        })?;
        let objective = match sol.status {
            QpStatus::Optimal => Some(sol.objective),
            QpStatus::Infeasible => None,
            QpStatus::Unbounded => return Err(PlanError::Unbounded(house.to_string())),
        };
        if let Some(obj) = objective {
            if best.is_none_or(|(_, b)| obj > b) {
                best = Some((i, obj));
            }
        }
        branches.push(BranchOutcome {
            house: *house,
            objective,
        });
        solutions.push((problem, sol));
    }
    let (best_idx, _) = best.ok_or(PlanError::Infeasible)?;
    let (problem, sol) = &solutions[best_idx];

    let x = DVector::from_iterator(
        sol.x.len(),
        sol.x.iter().map(|&v| if v.abs() < DECISION_DUST { 0.0 } else { v }),
    );
    let decision = DecisionVector::new(config.years, x);
    let consumption = implied_consumption(&decision, config, asset, kstart);
    Ok(LifecyclePlan {
        house_year: match choices[best_idx] {
            HouseChoice::None => None,
            HouseChoice::Year(y) => Some(y),
        },
        objective: model.objective(decision.as_vector()),
        feasibility_report: problem.max_violation(decision.as_vector()),
        consumption,
        kstart,
        discount_factor,
        branches,
        decision,
    })
}
