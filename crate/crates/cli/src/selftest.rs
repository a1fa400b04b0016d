//! Fast invariant checks of an installed build.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use qbattery::model::{
    anti_hermitian_residual, decay_min_eigenvalue, rank1_residual, Geometry, LindbladGenerator,
};
use qbattery::observables::{ergotropy, read_battery, single_atom_ergotropy, single_atom_rate, LocalHamiltonianSpec};
use qbattery::propagator::{evolve, exact_evolve_small, FullSpaceFlow, IntegratorConfig};
use qbattery::qubit::DensityMatrix;
use qbattery::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, bound: f64) -> Check {
    Check {
        name,
        passed: value <= bound,
        detail: format!("{value:.3e} <= {bound:.0e}"),
    }
}

fn failed(name: &'static str, err: impl std::fmt::Display) -> Check {
    Check {
        name,
        passed: false,
        detail: err.to_string(),
    }
}

fn random_density(n_sites: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let d = 1 << n_sites;
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut rho = &g * g.adjoint();
    let tr = rho.trace();
    rho /= tr;
    let mut rho = DensityMatrix::from_matrix(n_sites, rho).expect("square of matching size");
    rho.hermitize();
    rho
}

fn random_generator(n_atoms: usize, rng: &mut ChaCha8Rng) -> LindbladGenerator {
    let z = (1..=n_atoms).map(|j| j as f64 + rng.random_range(-0.5..=0.5)).collect();
    LindbladGenerator::new(&Geometry::from_positions(z).expect("positive positions"), rng.random_range(0.1..4.0 * PI))
}

fn single_atom_antinode() -> Check {
    let name = "single atom at an antinode, τ = 0.5";
    let run = || -> qbattery::Result<f64> {
        let gen = LindbladGenerator::new(&Geometry::from_positions(vec![1.0])?, PI / 2.0);
        let traj = evolve(&FullSpaceFlow::new(&gen), &DensityMatrix::charged(1, 1)?, &[0.5], &IntegratorConfig::default())?;
        Ok((traj.states[0].get(1, 1).re - (-1.0f64).exp()).abs())
    };
    run().map_or_else(|e| failed(name, e), |v| check(name, v, 1e-6))
}

fn single_atom_closed_form() -> Check {
    let name = "single atom energy and ergotropy on τ ∈ [0, 10]";
    let run = || -> qbattery::Result<f64> {
        let kd = 2.7 * PI;
        let gen = LindbladGenerator::new(&Geometry::from_positions(vec![1.0])?, kd);
        let times: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
        let traj = evolve(&FullSpaceFlow::new(&gen), &DensityMatrix::charged(1, 1)?, &times, &IntegratorConfig::default())?;
        let rate = single_atom_rate(kd);
        let mut worst = 0.0f64;
        for (t, s) in times.iter().zip(&traj.states) {
            let r = read_battery(s, 1)?;
            worst = worst.max((r.energy - (-rate * t).exp()).abs());
            worst = worst.max((r.ergotropy - single_atom_ergotropy(*t, rate)).abs());
        }
        Ok(worst)
    };
    run().map_or_else(|e| failed(name, e), |v| check(name, v, 1e-6))
}

fn two_atom_oracle() -> Check {
    let name = "L = 2 evolution against the superoperator exponential";
    let run = || -> qbattery::Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gen = random_generator(2, &mut rng);
        let rho0 = random_density(2, &mut rng);
        let traj = evolve(&FullSpaceFlow::new(&gen), &rho0, &[3.0], &IntegratorConfig::default())?;
        Ok(traj.states[0].max_abs_diff(&exact_evolve_small(&gen, &rho0, 3.0)?))
    };
    run().map_or_else(|e| failed(name, e), |v| check(name, v, 1e-6))
}

fn decay_matrix_checks() -> [Check; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut residual = 0.0f64;
    let mut min_eig = f64::INFINITY;
    for _ in 0..100 {
        let l = rng.random_range(1..=10);
        let gen = random_generator(l, &mut rng);
        residual = residual.max(rank1_residual(&gen)).max(anti_hermitian_residual(&gen));
        min_eig = min_eig.min(decay_min_eigenvalue(&gen));
    }
    [
        check("decay matrix is rank one and matches the Hamiltonian", residual, 1e-12),
        check("decay matrix is positive semidefinite", -min_eig, 1e-10),
    ]
}

fn trace_conservation() -> Check {
    let name = "generator conserves the trace";
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    for l in 1..=5 {
        let gen = random_generator(l, &mut rng);
        let rho = random_density(l, &mut rng);
        match gen.lindblad_rhs(&rho) {
            Ok(d) => worst = worst.max(d.trace().norm()),
            Err(e) => return failed(name, e),
        }
    }
    check(name, worst, 1e-12)
}

fn ergotropy_example() -> Check {
    let name = "ergotropy of diag(0.25, 0.75)";
    let rho = DensityMatrix::from_matrix(
        1,
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(0.25, 0.0), C64::new(0.75, 0.0)])),
    );
    match rho.and_then(|r| ergotropy(&r, &LocalHamiltonianSpec::new(1))) {
        Ok(e) => check(name, (e - 0.5).abs(), 1e-14),
        Err(e) => failed(name, e),
    }
}

pub fn run_checks() -> Vec<Check> {
    let mut checks = vec![single_atom_antinode(), single_atom_closed_form(), two_atom_oracle()];
    checks.extend(decay_matrix_checks());
    checks.push(trace_conservation());
    checks.push(ergotropy_example());
    checks
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_checks() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
