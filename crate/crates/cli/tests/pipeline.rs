use std::path::{Path, PathBuf};
use std::process::Command;

use lifefolio::lifecycle::{implied_consumption, Instruments};
use lifefolio_cli::pipeline::{read_plan_csv, FRONTIER_SVG, FUND_WEIGHTS, PLAN_CSV};
use lifefolio_cli::{run_pipeline, RunConfig, Stage};

fn sample_returns() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample_returns.csv")
}

fn config(out: &Path) -> RunConfig {
    let mut c = RunConfig {
        returns_path: sample_returns(),
        output_dir: out.to_path_buf(),
        ..RunConfig::default()
    };
    c.flags.emit_svg = true;
    c
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn full_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_pipeline(&config(dir.path()), Stage::All).unwrap();
    assert_eq!(
        listing(dir.path()),
        ["frontier.csv", "frontier.svg", "fund_weights.csv", "insurance.txt", "plan.csv"]
    );
    assert_eq!(report.written.len(), 5);

    let mut reader = csv::Reader::from_path(dir.path().join(FUND_WEIGHTS)).unwrap();
    let weights: Vec<f64> = reader.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert!(!weights.is_empty());
    assert!(weights.iter().all(|&w| w > 0.0));
    let total: f64 = weights.iter().sum();
    assert!((total - 1.0).abs() <= 1e-9, "weights sum to {total}");
}

#[test]
fn single_stages_write_only_their_files() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&config(dir.path()), Stage::Insure).unwrap();
    assert_eq!(listing(dir.path()), ["insurance.txt"]);
    run_pipeline(&config(dir.path()), Stage::Fund).unwrap();
    assert_eq!(listing(dir.path()), ["fund_weights.csv", "insurance.txt"]);
}

fn polyline(svg: &str, id: &str) -> Vec<(f64, f64)> {
    let start = svg.find(&format!("id=\"{id}\"")).unwrap();
    let rest = &svg[start..];
    let p = rest.find("points=\"").unwrap() + 8;
    let end = rest[p..].find('"').unwrap();
    rest[p..p + end]
        .split_whitespace()
        .map(|xy| {
            let (x, y) = xy.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

#[test]
fn svg_shows_long_only_frontier_never_left_of_unconstrained() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&config(dir.path()), Stage::Frontier).unwrap();
    let svg = std::fs::read_to_string(dir.path().join(FRONTIER_SVG)).unwrap();
    let long_only = polyline(&svg, "constrained");
    let free = polyline(&svg, "unconstrained");
    assert_eq!(long_only.len(), 50);
    assert_eq!(long_only.len(), free.len());
    for (c, u) in long_only.iter().zip(&free) {
        assert_eq!(c.1, u.1, "curves sampled at the same means");
        // coordinates are printed to 0.01 px
        assert!(u.0 <= c.0 + 0.01, "unconstrained {u:?} right of long-only {c:?}");
    }
    assert!(svg.contains("long-only frontier") && svg.contains("unconstrained frontier"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(&config(a.path()), Stage::All).unwrap();
    run_pipeline(&config(b.path()), Stage::All).unwrap();
    for name in listing(a.path()) {
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn plan_csv_round_trips_through_budget_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let report = run_pipeline(&cfg, Stage::Plan).unwrap();
    let file = read_plan_csv(&dir.path().join(PLAN_CSV)).unwrap();
    assert_eq!(&file.decision, &report.plan.as_ref().unwrap().decision);
    let recomputed = implied_consumption(&file.decision, &cfg.lifecycle, &file.asset, file.kstart);
    for (k, (a, b)) in recomputed.iter().zip(&file.consumption).enumerate() {
        assert!((a - b).abs() <= 1e-6, "year {}: {a} vs {b}", k + 1);
    }
    assert!(file.header["units"].contains("thousands"));
}

#[test]
fn failed_run_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    // fund and frontier succeed, the plan cannot meet the consumption floor
    cfg.lifecycle.income_high = 0.0;
    cfg.lifecycle.initial_saving = 0.0;
    cfg.lifecycle.instruments = Instruments {
        stock: false,
        borrow: false,
        save: false,
        house: false,
        insurance: false,
    };
    let err = run_pipeline(&cfg, Stage::All).unwrap_err();
    assert!(format!("{err:#}").starts_with("lifecycle:"), "{err:#}");
    assert!(listing(dir.path()).is_empty(), "{:?}", listing(dir.path()));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lifefolio")).args(args).output().unwrap()
}

#[test]
fn missing_returns_file_fails_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "returns_path = \"no/such/returns.csv\"\n").unwrap();
    let out = dir.path().join("out");
    let run = cli(&["fund", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!run.status.success());
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("no/such/returns.csv"), "{stderr}");
    assert!(stderr.contains("market"), "{stderr}");
    assert!(listing(&out).is_empty());
}

#[test]
fn binary_succeeds_on_sample_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, format!("returns_path = {:?}\nyears = 12\nhouse_years = 4\n", sample_returns())).unwrap();
    let run = cli(&["all", "--config", cfg.to_str().unwrap(), "--seed", "7", "--emit-svg", "--mc-kstart"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let insurance = std::fs::read_to_string(dir.path().join("out/insurance.txt")).unwrap();
    assert!(insurance.contains("seed = 7"));
    assert_eq!(listing(&dir.path().join("out")).len(), 5);
}

#[test]
fn bad_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "frontier_pts = 3\n").unwrap();
    let run = cli(&["frontier", "--config", cfg.to_str().unwrap()]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("frontier_pts"));
}
