use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use slotless::baselines::{eta_grid, gain_table};
use slotless::optimizer::{derive, OptimizerRequest, VariantChoice};
use slotless::simulator::{monte_carlo, simulate_pair, sweep_pair, MonteCarloOptions, SimOptions, SweepOptions};
use slotless::{Nanos, RadioParams};
use slotless_bench::{best, ETAS};

fn optimizer(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimize");
    for eta in ETAS {
        g.bench_function(format!("best/{eta}"), |b| {
            b.iter(|| derive(&OptimizerRequest::new(black_box(eta), VariantChoice::Best)))
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    for eta in ETAS {
        let s = best(eta);
        let offset = Nanos(s.config.t_s.finite().unwrap().get() / 3);
        g.bench_function(format!("pair/{eta}"), |b| {
            b.iter(|| simulate_pair(&s.config, &s.config, black_box(offset), &SimOptions::default()))
        });
    }
    let s = best(0.1);
    g.bench_function("sweep/0.1", |b| {
        b.iter(|| sweep_pair(&s.config, &s.config, &SweepOptions::with_step(s.config.d_a)))
    });
    let opts = MonteCarloOptions {
        collisions: true,
        skew_ppm_range: 20.0,
        horizon: Some(Nanos::from_secs(30)),
    };
    g.sample_size(10);
    g.bench_function("monte_carlo/0.1/1000", |b| b.iter(|| monte_carlo(&s.config, 1000, 7, &opts)));
    g.finish();
}

fn comparison(c: &mut Criterion) {
    let grid = eta_grid(0.01, 0.2, 0.001).unwrap();
    let radio = RadioParams::default();
    let mut g = c.benchmark_group("compare");
    g.sample_size(10);
    g.bench_function("gain_table/191", |b| b.iter(|| gain_table(&grid, &radio, Nanos::from_millis(10))));
    g.finish();
}

criterion_group!(benches, optimizer, simulation, comparison);
criterion_main!(benches);
