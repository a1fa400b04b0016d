//! Exact small-system propagation through the dense superoperator.
//!
//! Test-only route: column `a + b·d` of the superoperator is vec(𝓛(|a⟩⟨b|)),
//! computed with the pairwise-sum right-hand side, and the flow map is its
//! matrix exponential (Padé with scaling and squaring).

use nalgebra::{DMatrix, DVector};

use crate::model::LindbladGenerator;
use crate::qubit::DensityMatrix;
use crate::{C64, Error, Result};

pub const ORACLE_MAX_SITES: usize = 4;

/// Dense `4^L × 4^L` matrix of 𝓛 acting on column-major vec(ρ).
pub fn superoperator(generator: &LindbladGenerator) -> Result<DMatrix<C64>> {
    let l = generator.n_atoms();
    if l > ORACLE_MAX_SITES {
        return Err(Error::SystemTooLarge {
            n_sites: l,
            limit: ORACLE_MAX_SITES,
        });
    }
    let d = 1usize << l;
    let mut sup = DMatrix::zeros(d * d, d * d);
    let mut unit = DensityMatrix::zeros(l)?;
    for b in 0..d {
        for a in 0..d {
            unit.matrix_mut()[(a, b)] = C64::new(1.0, 0.0);
            let image = generator.lindblad_rhs(&unit)?;
            sup.column_mut(a + b * d).copy_from_slice(image.matrix().as_slice());
            unit.matrix_mut()[(a, b)] = C64::new(0.0, 0.0);
        }
    }
    Ok(sup)
}

/// ρ(t) = exp(t𝓛) ρ₀ for `L ≤ 4`.
pub fn exact_evolve_small(generator: &LindbladGenerator, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let l = generator.n_atoms();
    if rho0.n_sites() != l {
        return Err(Error::DimensionMismatch {
            expected: 1 << l,
            found: rho0.dim(),
        });
    }
    let sup = superoperator(generator)?;
    let flow = (sup * C64::new(t, 0.0)).exp();
    let v = DVector::from_column_slice(rho0.matrix().as_slice());
    let out = flow * v;
    let d = rho0.dim();
    DensityMatrix::from_matrix(l, DMatrix::from_column_slice(d, d, out.as_slice()))
}
