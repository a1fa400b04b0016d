#![allow(dead_code)]

use nalgebra::DMatrix;
use qbattery::model::Geometry;
use qbattery::qubit::DensityMatrix;
use qbattery::C64;
use rand::Rng;

/// G G† / Tr, full rank with probability one.
pub fn random_density<R: Rng>(n_sites: usize, rng: &mut R) -> DensityMatrix {
    let d = 1 << n_sites;
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut rho = &g * g.adjoint();
    let tr = rho.trace();
    rho /= tr;
    let mut rho = DensityMatrix::from_matrix(n_sites, rho).unwrap();
    rho.hermitize();
    rho
}

/// Random Hermitian, trace-one, not necessarily positive.
pub fn random_hermitian<R: Rng>(n_sites: usize, rng: &mut R) -> DensityMatrix {
    let d = 1 << n_sites;
    let a = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut h = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    let shift = (C64::new(1.0, 0.0) - h.trace()) / d as f64;
    for i in 0..d {
        h[(i, i)] += shift;
    }
    DensityMatrix::from_matrix(n_sites, h).unwrap()
}

pub fn random_geometry<R: Rng>(n_atoms: usize, rng: &mut R) -> Geometry {
    Geometry::from_positions((1..=n_atoms).map(|j| j as f64 + rng.random_range(-0.5..=0.5)).collect()).unwrap()
}
