//! Stats → long-only fund → frontier → insurance valuation → lifecycle plan, and the files
//! each stage writes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lifefolio::insurance::{
    analytic_discount_factor, analytic_strike_year, estimate_discount_factor, survival_prob, McEstimate,
    SAMPLER,
};
use lifefolio::lifecycle::{
    solve_lifecycle, DecisionVector, DiscountMode, KstartMode, LifecyclePlan, PlanOptions, RiskyAssetSummary,
};
use lifefolio::market::{estimate_stats, load_returns, AssetStats};
use lifefolio::markowitz::{frontier_constants, unconstrained_frontier_variance, PortfolioWeights};
use lifefolio::portfolio::{max_sharpe_long_only, trace_frontier, ConstrainedFrontier};
use nalgebra::DVector;

use crate::config::RunConfig;
use crate::svg::render_frontier_svg;

pub const FUND_WEIGHTS: &str = "fund_weights.csv";
pub const FRONTIER_CSV: &str = "frontier.csv";
pub const FRONTIER_SVG: &str = "frontier.svg";
pub const INSURANCE_TXT: &str = "insurance.txt";
pub const PLAN_CSV: &str = "plan.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Fund,
    Frontier,
    Insure,
    Plan,
    All,
}

impl Stage {
    fn includes(self, other: Stage) -> bool {
        self == Stage::All || self == other
    }
}

/// What a run produced, for the caller's summary.
#[derive(Debug, Default)]
pub struct RunReport {
    pub written: Vec<PathBuf>,
    pub fund: Option<PortfolioWeights>,
    pub frontier_points: Option<usize>,
    pub insurance: Option<McEstimate>,
    pub plan: Option<LifecyclePlan>,
}

/// Runs `stage` and writes its artifacts under `config.output_dir`. On error every file
/// written by this run is removed again.
pub fn run_pipeline(config: &RunConfig, stage: Stage) -> Result<RunReport> {
    config.validate().context("config")?;
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("cannot create output directory {}", config.output_dir.display()))?;
    let mut report = RunReport::default();
    match run_stages(config, stage, &mut report) {
        Ok(()) => Ok(report),
        Err(e) => {
            for path in &report.written {
                let _ = std::fs::remove_file(path);
            }
            Err(e)
        }
    }
}

fn run_stages(config: &RunConfig, stage: Stage, report: &mut RunReport) -> Result<()> {
    let out = |name: &str| config.output_dir.join(name);
    let needs_stats = stage != Stage::Insure;
    let stats = if needs_stats { Some(load_stats(config)?) } else { None };

    let fund = match &stats {
        Some(stats) if stage.includes(Stage::Fund) || stage.includes(Stage::Plan) => {
            Some(max_sharpe_long_only(stats, config.r_f).context("portfolio")?)
        }
        _ => None,
    };
    if stage.includes(Stage::Fund) {
        let (stats, fund) = (stats.as_ref().unwrap(), fund.as_ref().unwrap());
        let path = out(FUND_WEIGHTS);
        report.written.push(path.clone());
        write_fund_weights(&path, stats, fund)?;
    }

    if stage.includes(Stage::Frontier) {
        let stats = stats.as_ref().unwrap();
        let frontier = trace_frontier(stats, config.frontier_points).context("portfolio")?;
        let constants = frontier_constants(stats, config.r_f).context("markowitz")?;
        let path = out(FRONTIER_CSV);
        report.written.push(path.clone());
        write_frontier_csv(&path, &frontier, &constants)?;
        if config.flags.emit_svg {
            let path = out(FRONTIER_SVG);
            report.written.push(path.clone());
            render_frontier_svg(&frontier, &constants, &path).context("report")?;
        }
        report.frontier_points = Some(frontier.points.len());
    }

    if stage.includes(Stage::Insure) {
        let model = config.lifecycle.hazard_model();
        let estimate =
            estimate_discount_factor(&model, config.mc_draws, config.mc_seed).context("insurance")?;
        let path = out(INSURANCE_TXT);
        report.written.push(path.clone());
        write_insurance(&path, config, &estimate)?;
        report.insurance = Some(estimate);
    }

    if stage.includes(Stage::Plan) {
        let fund = fund.as_ref().unwrap();
        let asset = RiskyAssetSummary {
            r_stock: fund.mean,
            var_stock: fund.variance,
        };
        let (draws, seed) = (config.mc_draws, config.mc_seed);
        let options = PlanOptions {
            kstart: if config.flags.mc_kstart {
                KstartMode::MonteCarlo { draws, seed }
            } else {
                KstartMode::Analytic
            },
            discount: if config.flags.paper_faithful_v {
                DiscountMode::MonteCarlo { draws, seed }
            } else {
                DiscountMode::Analytic
            },
            ..PlanOptions::default()
        };
        let plan = solve_lifecycle(&config.lifecycle, &asset, &options).context("lifecycle")?;
        let path = out(PLAN_CSV);
        report.written.push(path.clone());
        write_plan_csv(&path, &plan, &asset)?;
        report.plan = Some(plan);
    }
    report.fund = fund;
    Ok(())
}

fn load_stats(config: &RunConfig) -> Result<AssetStats> {
    let returns = load_returns(&config.returns_path, config.periods_per_year).context("market")?;
    estimate_stats(&returns).context("market")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("report: cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn finish<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().with_context(|| format!("report: cannot write {}", path.display()))
}

/// Nonzero weights only, in asset order.
pub fn write_fund_weights(path: &Path, stats: &AssetStats, fund: &PortfolioWeights) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["asset_id", "weight"])?;
    for (id, &weight) in stats.asset_ids().iter().zip(fund.weights.iter()) {
        if weight > 0.0 {
            w.write_record([id.clone(), weight.to_string()])?;
        }
    }
    finish(w, path)
}

pub fn write_frontier_csv(
    path: &Path,
    frontier: &ConstrainedFrontier,
    constants: &lifefolio::markowitz::FrontierConstants,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["mu", "variance_constrained", "variance_unconstrained"])?;
    for p in &frontier.points {
        let free = unconstrained_frontier_variance(constants, p.mean).context("markowitz")?;
        w.write_record([p.mean.to_string(), p.variance.to_string(), free.to_string()])?;
    }
    finish(w, path)
}

pub fn write_insurance(path: &Path, config: &RunConfig, estimate: &McEstimate) -> Result<()> {
    let model = config.lifecycle.hazard_model();
    let horizon = f64::from(model.horizon);
    let survival = survival_prob(&model, horizon).context("insurance")?;
    let mut f = create(path)?;
    let lines = [
        format!("discount_factor_estimate = {}", estimate.value),
        format!("std_error = {}", estimate.std_error),
        format!("draws = {}", estimate.n_draws),
        format!("seed = {}", estimate.seed),
        format!("sampler = {SAMPLER}"),
        format!("analytic_discount_factor = {}", analytic_discount_factor(&model)),
        format!("hazard_rate = {}", model.h),
        format!("discount_rate = {}", model.r),
        format!("survival_at_{} = {survival}", model.horizon),
        format!("analytic_strike_year = {}", analytic_strike_year(&model)),
    ];
    for line in lines {
        writeln!(f, "{line}")?;
    }
    f.flush().with_context(|| format!("report: cannot write {}", path.display()))
}

pub fn write_plan_csv(path: &Path, plan: &LifecyclePlan, asset: &RiskyAssetSummary) -> Result<()> {
    let mut f = create(path)?;
    let house = plan.house_year.map_or("none".to_owned(), |y| y.to_string());
    writeln!(f, "# units = thousands of currency; stock is the amount put into the fund")?;
    writeln!(f, "# house_year = {house}")?;
    writeln!(f, "# insurance = {}", plan.decision.insurance())?;
    writeln!(f, "# kstart = {}", plan.kstart)?;
    writeln!(f, "# discount_factor = {}", plan.discount_factor)?;
    writeln!(f, "# objective = {}", plan.objective)?;
    writeln!(f, "# r_stock = {}", asset.r_stock)?;
    writeln!(f, "# var_stock = {}", asset.var_stock)?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["year", "stock", "borrow", "save", "consumption"])?;
    let d = &plan.decision;
    for k in 0..d.years() {
        w.write_record([
            (k + 1).to_string(),
            d.stock()[k].to_string(),
            d.borrow()[k].to_string(),
            d.save()[k].to_string(),
            plan.consumption[k].to_string(),
        ])?;
    }
    finish(w, path)
}

/// A `plan.csv` read back: the decision vector plus the reported consumption and header values.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanFile {
    pub decision: DecisionVector,
    pub consumption: Vec<f64>,
    pub kstart: usize,
    pub asset: RiskyAssetSummary,
    pub header: BTreeMap<String, String>,
}

pub fn read_plan_csv(path: &Path) -> Result<PlanFile> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut header = BTreeMap::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let Some(comment) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = comment.split_once('=') {
            header.insert(k.trim().to_owned(), v.trim().to_owned());
        }
    }
    let field = |k: &str| header.get(k).with_context(|| format!("{}: missing `{k}`", path.display()));
    let number = |k: &str| -> Result<f64> { Ok(field(k)?.parse()?) };

    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut rows: Vec<[f64; 4]> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let v = |i: usize| -> Result<f64> { Ok(record[i].parse()?) };
        rows.push([v(1)?, v(2)?, v(3)?, v(4)?]);
    }
    let m = rows.len();
    if m == 0 {
        bail!("{}: no plan rows", path.display());
    }
    let mut x = DVector::zeros(4 * m + 1);
    for (k, r) in rows.iter().enumerate() {
        x[k] = r[0];
        x[m + k] = r[1];
        x[2 * m + k] = r[2];
    }
    if let Ok(year) = field("house_year")?.parse::<usize>() {
        x[3 * m + year - 1] = 1.0;
    }
    x[4 * m] = number("insurance")?;
    Ok(PlanFile {
        decision: DecisionVector::new(m, x),
        consumption: rows.iter().map(|r| r[3]).collect(),
        kstart: field("kstart")?.parse()?,
        asset: RiskyAssetSummary {
            r_stock: number("r_stock")?,
            var_stock: number("var_stock")?,
        },
        header,
    })
}
