mod common;

use std::f64::consts::PI;

use common::{random_density, random_geometry};
use qbattery::model::{Geometry, LindbladGenerator};
use qbattery::propagator::{
    evolve, exact_evolve_small, FullSpaceFlow, IntegratorConfig, SectorFlow, SectorState,
};
use qbattery::qubit::{BasisState, DensityMatrix};
use qbattery::sector::sector_recompose;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn generator(positions: &[f64], kd: f64) -> LindbladGenerator {
    LindbladGenerator::new(&Geometry::from_positions(positions.to_vec()).unwrap(), kd)
}

#[test]
fn single_antinode_atom_decays_at_twice_the_bare_rate() {
    let gen = generator(&[1.0], PI / 2.0);
    let rho0 = DensityMatrix::charged(1, 1).unwrap();
    let traj = evolve(&FullSpaceFlow::new(&gen), &rho0, &[0.5], &IntegratorConfig::default()).unwrap();
    let p_excited = traj.states[0].get(1, 1).re;
    assert!((p_excited - (-1.0f64).exp()).abs() < 1e-6, "{p_excited}");
}

#[test]
fn bragg_spacing_is_unitary() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gen = generator(&[1.0, 2.0], 2.0 * PI);
    let rho0 = random_density(2, &mut rng);
    let times: Vec<f64> = (0..=20).map(|i| 5.0 * i as f64).collect();
    let traj = evolve(&FullSpaceFlow::new(&gen), &rho0, &times, &IntegratorConfig::default()).unwrap();
    let p0 = rho0.purity();
    for s in &traj.states {
        assert!((s.purity() - p0).abs() < 1e-8);
    }
}

#[test]
fn zero_time_sample_is_the_initial_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let gen = generator(&[1.0, 2.3, 2.9], 2.7 * PI);
    let rho0 = random_density(3, &mut rng);
    for config in [IntegratorConfig::default(), IntegratorConfig::fixed_rk4(0.01)] {
        let traj = evolve(&FullSpaceFlow::new(&gen), &rho0, &[0.0, 1.0], &config).unwrap();
        assert_eq!(traj.states[0], rho0);
        assert_eq!(traj.sample_times, vec![0.0, 1.0]);
    }
}

#[test]
fn oracle_matches_single_atom_closed_form_and_is_identity_at_zero() {
    let kd = 2.7 * PI;
    let gen = generator(&[1.0], kd);
    let rho0 = DensityMatrix::charged(1, 1).unwrap();
    let rate = 1.0 - (2.0 * kd).cos();
    for t in [0.1, 1.0, 3.0] {
        let rho = exact_evolve_small(&gen, &rho0, t).unwrap();
        assert!((rho.get(1, 1).re - (-rate * t).exp()).abs() < 1e-10);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rho = random_density(2, &mut rng);
    let gen2 = generator(&[1.0, 2.0], kd);
    assert!(exact_evolve_small(&gen2, &rho, 0.0).unwrap().max_abs_diff(&rho) < 1e-15);
}

#[test]
fn adaptive_evolution_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for l in [2, 3] {
        let gen = LindbladGenerator::new(&random_geometry(l, &mut rng), 2.7 * PI);
        let rho0 = random_density(l, &mut rng);
        let times = [0.1, 1.0, 3.0, 10.0];
        let traj = evolve(&FullSpaceFlow::new(&gen), &rho0, &times, &IntegratorConfig::default()).unwrap();
        for (t, s) in times.iter().zip(&traj.states) {
            let exact = exact_evolve_small(&gen, &rho0, *t).unwrap();
            assert!(s.max_abs_diff(&exact) < 1e-6, "L={l} t={t}: {}", s.max_abs_diff(&exact));
        }
    }
}

#[test]
fn fixed_rk4_is_fourth_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let gen = generator(&[1.0, 1.8], 2.7 * PI);
    let rho0 = random_density(2, &mut rng);
    let exact = exact_evolve_small(&gen, &rho0, 1.0).unwrap();
    let steps = [0.02, 0.01, 0.005];
    let errors: Vec<f64> = steps
        .iter()
        .map(|&h| {
            let traj = evolve(&FullSpaceFlow::new(&gen), &rho0, &[1.0], &IntegratorConfig::fixed_rk4(h)).unwrap();
            traj.states[0].max_abs_diff(&exact)
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = steps.iter().zip(&errors).map(|(h, e)| (h.ln(), e.ln())).unzip();
    let xm = x.iter().sum::<f64>() / 3.0;
    let ym = y.iter().sum::<f64>() / 3.0;
    let slope = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum::<f64>()
        / x.iter().map(|a| (a - xm).powi(2)).sum::<f64>();
    assert!((slope - 4.0).abs() < 0.3, "slope {slope}, errors {errors:?}");
}

#[test]
fn halving_tolerance_never_increases_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..3 {
        let gen = LindbladGenerator::new(&random_geometry(2, &mut rng), 2.7 * PI);
        let rho0 = random_density(2, &mut rng);
        let exact = exact_evolve_small(&gen, &rho0, 3.0).unwrap();
        let mut previous = f64::INFINITY;
        let mut tol = 1e-5;
        while tol > 1e-10 {
            let traj =
                evolve(&FullSpaceFlow::new(&gen), &rho0, &[3.0], &IntegratorConfig::adaptive(tol, tol)).unwrap();
            let err = traj.states[0].max_abs_diff(&exact);
            assert!(err <= previous, "tol {tol}: {err} > {previous}");
            previous = err;
            tol /= 2.0;
        }
    }
}

#[test]
fn snapshots_stay_positive_and_trace_preserving() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let config = IntegratorConfig::default();
    let times = [0.1, 1.0, 10.0, 100.0];
    for l in 1..=5 {
        let gen = LindbladGenerator::new(&random_geometry(l, &mut rng), 2.7 * PI);
        let rho0 = if l <= 3 {
            random_density(l, &mut rng)
        } else {
            DensityMatrix::basis_projector(BasisState::first_excited(l, l.min(3)).unwrap())
        };
        let traj = evolve(&FullSpaceFlow::new(&gen), &rho0, &times, &config).unwrap();
        assert!(traj.min_eigenvalue() >= -1e-6, "L={l}: {}", traj.min_eigenvalue());
        assert!(traj.max_trace_drift() <= config.trace_drift_bound());
    }
}

#[test]
fn sector_flow_matches_full_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let config = IntegratorConfig::adaptive(1e-11, 1e-11);
    let times = [0.3, 3.0, 30.0];
    for (l, m) in [(1, 1), (2, 1), (3, 2), (4, 3), (5, 2), (5, 3)] {
        let gen = LindbladGenerator::new(&random_geometry(l, &mut rng), 2.7 * PI);
        let full = evolve(&FullSpaceFlow::new(&gen), &DensityMatrix::charged(l, m).unwrap(), &times, &config)
            .unwrap();
        let blocked = evolve(
            &SectorFlow::new(&gen, m).unwrap(),
            &SectorState::charged(l, m).unwrap(),
            &times,
            &config,
        )
        .unwrap();
        for (f, b) in full.states.iter().zip(&blocked.states) {
            let diff = f.max_abs_diff(&sector_recompose(&b.to_blocks()));
            assert!(diff < 1e-8, "L={l} M={m}: {diff}");
        }
    }
}
