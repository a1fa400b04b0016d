use std::f64::consts::PI;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qbattery::ensemble::{run_ensemble, EnsembleConfig};
use qbattery::exec::available_workers;
use qbattery::model::{Arrangement, SystemSpec};
use qbattery::propagator::log_time_grid;
use qbattery::Execution;

fn disorder_ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("disorder_ensemble");
    group.sample_size(10).measurement_time(Duration::from_secs(20));
    for l in [4, 6] {
        let spec = SystemSpec::new(l, 3, 2.7 * PI, Arrangement::Disordered).unwrap();
        let config = EnsembleConfig::new(spec, 16, 1, log_time_grid(1e-2, 1e2, 41));
        group.bench_with_input(BenchmarkId::new("sequential", l), &config, |b, cfg| {
            b.iter(|| run_ensemble(cfg, Execution::Sequential).unwrap())
        });
        let parallel = Execution::with_workers(available_workers());
        group.bench_with_input(BenchmarkId::new("parallel", l), &config, |b, cfg| {
            b.iter(|| run_ensemble(cfg, parallel).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, disorder_ensemble);
criterion_main!(benches);
