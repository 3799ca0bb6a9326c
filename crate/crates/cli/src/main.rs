use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use lifefolio_cli::{run_pipeline, RunConfig, RunReport, Stage};

#[derive(Parser)]
#[command(name = "lifefolio", version, about = "Long-only fund, frontier, insurance and lifecycle plan")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Monte-Carlo seed (overrides `mc_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Value the insurance spread with the simulated discount factor.
    #[arg(long, global = true)]
    paper_faithful_v: bool,
    /// Take the income-drop year from the simulated mean strike time.
    #[arg(long, global = true)]
    mc_kstart: bool,
    /// Also write frontier.svg.
    #[arg(long, global = true)]
    emit_svg: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Asset statistics and the long-only maximum-Sharpe fund.
    Fund,
    /// Long-only and unconstrained frontiers.
    Frontier,
    /// Hazard-rate insurance valuation.
    Insure,
    /// Lifecycle investment, borrowing, saving and house plan.
    Plan,
    /// Everything above.
    All,
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.mc_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.flags.paper_faithful_v |= cli.paper_faithful_v;
    config.flags.mc_kstart |= cli.mc_kstart;
    config.flags.emit_svg |= cli.emit_svg;
    Ok(config)
}

fn summarize(report: &RunReport) {
    if let Some(f) = &report.fund {
        let held = f.weights.iter().filter(|&&w| w > 0.0).count();
        println!(
            "fund: {held} assets, mean {:.4}, sd {:.4}, Sharpe {:.4}",
            f.mean,
            f.variance.sqrt(),
            f.sharpe
        );
    }
    if let Some(n) = report.frontier_points {
        println!("frontier: {n} points");
    }
    if let Some(e) = &report.insurance {
        println!("insurance: V = {:.5} ± {:.5} ({} draws, seed {})", e.value, e.std_error, e.n_draws, e.seed);
    }
    if let Some(p) = &report.plan {
        let house = p.house_year.map_or("no house".to_owned(), |y| format!("house in year {y}"));
        println!("plan: {house}, insurance {:.4}, objective {:.4}", p.decision.insurance(), p.objective);
    }
    for path in &report.written {
        println!("wrote {}", path.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = match cli.command {
        Command::Fund => Stage::Fund,
        Command::Frontier => Stage::Frontier,
        Command::Insure => Stage::Insure,
        Command::Plan => Stage::Plan,
        Command::All => Stage::All,
    };
    match config(&cli).and_then(|c| run_pipeline(&c, stage)) {
        Ok(report) => {
            summarize(&report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
