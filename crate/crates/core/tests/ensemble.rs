use std::f64::consts::PI;

use qbattery::ensemble::{run_ensemble, simulate_geometry, EnsembleConfig, EnsembleSummary};
use qbattery::model::{build_geometry, Arrangement, SystemSpec};
use qbattery::propagator::log_time_grid;
use qbattery::Execution;

fn config(l: usize, arrangement: Arrangement, n_avg: usize) -> EnsembleConfig {
    let spec = SystemSpec::new(l, 2, 2.7 * PI, arrangement).unwrap();
    let mut times = vec![0.0];
    times.extend(log_time_grid(0.1, 50.0, 12));
    EnsembleConfig::new(spec, n_avg, 99, times)
}

#[test]
fn summary_is_independent_of_worker_count() {
    let cfg = config(4, Arrangement::Disordered, 12);
    let one = run_ensemble(&cfg, Execution::Sequential).unwrap();
    for workers in [2, 8] {
        let many = run_ensemble(&cfg, Execution::with_workers(workers)).unwrap();
        assert_eq!(one, many, "{workers} workers");
    }
    assert_eq!(one.realization_count(), 12);
    assert_eq!(one.seeds().len(), 12);
}

#[test]
fn zero_disorder_reproduces_the_ordered_run() {
    let ordered = run_ensemble(&config(4, Arrangement::Ordered, 1), Execution::Sequential).unwrap();
    let cfg = config(4, Arrangement::Disordered, 1);
    let geometry = build_geometry(&cfg.spec, Some(&[0.0; 4])).unwrap();
    let record = simulate_geometry(&cfg.spec, &geometry, &cfg.sample_times, &cfg.integrator).unwrap();
    assert_eq!(record.energy_per_cell, ordered.energy_per_cell.mean);
    assert_eq!(record.ergotropy_per_cell, ordered.ergotropy_per_cell.mean);
    assert!(ordered.energy_per_cell.stderr.iter().all(|s| *s == 0.0));
}

#[test]
fn ordered_ensemble_path_matches_direct_simulation() {
    let cfg = config(5, Arrangement::Ordered, 1);
    let summary = run_ensemble(&cfg, Execution::Sequential).unwrap();
    let geometry = build_geometry(&cfg.spec, None).unwrap();
    let direct = simulate_geometry(&cfg.spec, &geometry, &cfg.sample_times, &cfg.integrator).unwrap();
    assert_eq!(summary.energy_per_cell.mean, direct.energy_per_cell);
    assert_eq!(summary.ergotropy_per_cell.mean, direct.ergotropy_per_cell);
    for (site, series) in summary.site_energies.iter().zip(&direct.site_energies) {
        assert_eq!(&site.mean, series);
    }
}

#[test]
fn merging_disjoint_ranges_equals_the_union() {
    let mut cfg = config(3, Arrangement::Disordered, 7);
    let whole = run_ensemble(&cfg, Execution::Sequential).unwrap();
    cfg.n_avg = 3;
    let head = run_ensemble(&cfg, Execution::Sequential).unwrap();
    cfg.first_index = 3;
    cfg.n_avg = 4;
    let tail = run_ensemble(&cfg, Execution::Sequential).unwrap();
    let merged = tail.merge(&head).unwrap();
    assert_eq!(merged.energy_per_cell.mean, whole.energy_per_cell.mean);
    assert_eq!(merged.ergotropy_per_cell.mean, whole.ergotropy_per_cell.mean);
    for (a, b) in merged.energy_per_cell.stderr.iter().zip(&whole.energy_per_cell.stderr) {
        assert!((a - b).abs() <= 1e-14 * b.abs());
    }
    assert_eq!(merged.seeds(), whole.seeds());
    assert!(head.merge(&head).is_err());
}

#[test]
fn means_lie_within_realization_range() {
    let summary: EnsembleSummary = run_ensemble(&config(4, Arrangement::Disordered, 9), Execution::Sequential).unwrap();
    for t in 0..summary.sample_times.len() {
        let values: Vec<f64> = summary.records.iter().map(|r| r.energy_per_cell[t]).collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = summary.energy_per_cell.mean[t];
        assert!(lo <= mean && mean <= hi);
        assert!((0.0..=1.0).contains(&mean));
        for r in &summary.records {
            assert!(r.ergotropy_per_cell[t] <= r.energy_per_cell[t] + 1e-12);
        }
    }
}
