use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use dosnet::oracle::{optimize_static, solve_threshold, RateDistribution, StationClass};
use dosnet::{simulate_run, validate_scenario, PolicySpec, ScenarioConfig, StationSpec, TimeBase};

fn scenario(n: u32, policy: PolicySpec, horizon: u64) -> ScenarioConfig {
    let stations = (1..=n).map(|i| StationSpec::saturated(i, 1.0 + (i % 4) as f64, policy)).collect();
    let mut cfg = ScenarioConfig::new(stations, horizon);
    cfg.warmup = horizon / 10;
    validate_scenario(cfg).unwrap()
}

fn engine(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_run");
    g.sample_size(10);
    for (name, policy) in [("ados", PolicySpec::Ados), ("csma_ca", PolicySpec::CsmaCa { p: None })] {
        let cfg = scenario(20, policy, 1_000_000);
        g.bench_function(format!("{name}/n20/1e6"), |b| b.iter(|| simulate_run(black_box(&cfg)).unwrap()));
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let tb = TimeBase { tau: 1.0, hold: 10.0 };
    let d = RateDistribution::shannon(1.0, 1.0);
    c.bench_function("solve_threshold/rayleigh", |b| {
        b.iter(|| solve_threshold(black_box(&d), &tb, (-1.0f64).exp()).unwrap())
    });
    let classes: Vec<StationClass> = (0..4)
        .map(|g| StationClass {
            dist: RateDistribution::shannon(1.0 + 2.0 * g as f64, 1.0),
            count: 5,
        })
        .collect();
    let mut g = c.benchmark_group("grid");
    g.sample_size(10);
    g.bench_function("optimize_static/4x5", |b| b.iter(|| optimize_static(black_box(&classes), &tb, 4).unwrap()));
    g.finish();
}

criterion_group!(benches, engine, oracle);
criterion_main!(benches);
