//! Sequential vs parallel execution of the three data-parallel kernels.
//!
//! Build with `--no-default-features` to see the fallback: both modes then run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lifefolio::insurance::{estimate_discount_factor_with, HazardModel};
use lifefolio::lifecycle::{solve_lifecycle, LifecycleConfig, PlanOptions, RiskyAssetSummary};
use lifefolio::market::AssetStats;
use lifefolio::portfolio::trace_frontier_with;
use lifefolio::Execution;
use nalgebra::{DMatrix, DVector};
use std::hint::black_box;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn label(exec: Execution) -> &'static str {
    match exec {
        Execution::Sequential => "sequential",
        Execution::Parallel => "parallel",
    }
}

fn monte_carlo(c: &mut Criterion) {
    let model = HazardModel::new(0.06, 0.03, 30.0, 0.5, 30).unwrap();
    let mut group = c.benchmark_group("discount_factor_1e6_draws");
    group.sample_size(20);
    for exec in MODES {
        group.bench_function(label(exec), |b| {
            b.iter(|| estimate_discount_factor_with(&model, black_box(1_000_000), 7, exec).unwrap())
        });
    }
    group.finish();
}

/// Deterministic 30-asset universe: one market factor plus idiosyncratic noise.
fn universe(n: usize) -> AssetStats {
    let beta = DVector::from_fn(n, |i, _| 0.5 + (i % 7) as f64 * 0.15);
    let idio = DVector::from_fn(n, |i, _| 0.02 + (i % 5) as f64 * 0.01);
    let sigma = &beta * beta.transpose() * 0.03 + DMatrix::from_diagonal(&idio);
    let mu = DVector::from_fn(n, |i, _| 0.03 + 0.004 * i as f64 + 0.02 * beta[i]);
    AssetStats::unnamed(mu, sigma).unwrap()
}

fn frontier(c: &mut Criterion) {
    let stats = universe(30);
    let mut group = c.benchmark_group("frontier_30_assets");
    for points in [20, 80] {
        for exec in MODES {
            group.bench_with_input(BenchmarkId::new(label(exec), points), &points, |b, &n| {
                b.iter(|| trace_frontier_with(&stats, n, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn lifecycle(c: &mut Criterion) {
    let config = LifecycleConfig::default();
    let asset = RiskyAssetSummary { r_stock: 0.1, var_stock: 0.05 };
    let mut group = c.benchmark_group("lifecycle_30_years");
    group.sample_size(20);
    for exec in MODES {
        let options = PlanOptions { execution: exec, ..PlanOptions::default() };
        group.bench_function(label(exec), |b| {
            b.iter(|| solve_lifecycle(&config, &asset, &options).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, frontier, lifecycle);
criterion_main!(benches);
