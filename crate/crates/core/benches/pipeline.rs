//! Single-thread vs full rayon pool on the data-parallel stages.
//!
//! The one-thread pool runs the same code path as the sequential build, so
//! the ratio between the two groups is the parallel speed-up.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use graspkit::cloud::estimate_normals_curvatures;
use graspkit::planner::{self, PlannerConfig};
use graspkit::robustness::{robust_force_closure, PerturbationSpec};
use graspkit::synthetic::{corpus_lookup, generate};
use rayon::ThreadPool;

fn pools() -> Vec<(String, ThreadPool)> {
    let n = rayon::current_num_threads();
    let mut out = vec![(
        "1-thread".to_string(),
        rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap(),
    )];
    if n > 1 {
        out.push((
            format!("{n}-threads"),
            rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap(),
        ));
    }
    out
}

fn bench(c: &mut Criterion) {
    let cfg = PlannerConfig::default();
    let cloud = generate(&corpus_lookup("box_cracker").unwrap().spec).unwrap();
    let filtered = planner::filter_cloud(&cloud, &cfg).unwrap();
    let processed = planner::preprocess(&cloud, &cfg).unwrap().unwrap();
    let best = planner::plan(&cloud, &cfg).unwrap().best.unwrap();
    let spec = PerturbationSpec::new(0.01, 2000, 0);

    let mut g = c.benchmark_group("normals");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(&name), |b| {
            pool.install(|| b.iter(|| estimate_normals_curvatures(black_box(&filtered), cfg.normal_k).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("robustness_2000_trials");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(&name), |b| {
            pool.install(|| b.iter(|| robust_force_closure((&best).into(), black_box(&processed), &spec).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("plan");
    g.sample_size(20);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(&name), |b| {
            pool.install(|| b.iter(|| planner::plan(black_box(&cloud), &cfg).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
