//! Battery energy, site energies, ergotropy and the single-atom closed forms.
//!
//! Energies count one unit per excitation: the local Hamiltonian of `M`
//! cells is `H₀ = Σ_j |e⟩⟨e|_j`, so a basis state's energy is its excitation
//! count and the fully charged battery holds `M`.

use nalgebra::DMatrix;

use crate::policy::POLICY;
use crate::qubit::{self, DensityMatrix};
use crate::sector::{partial_trace_blocked, BlockDensityMatrix};
use crate::{C64, Error, Result};

/// States that can be reduced to a subset of sites.
pub trait Reducible {
    fn n_sites(&self) -> usize;
    fn reduce(&self, keep: &[usize]) -> Result<DensityMatrix>;
}

impl Reducible for DensityMatrix {
    fn n_sites(&self) -> usize {
        DensityMatrix::n_sites(self)
    }

    fn reduce(&self, keep: &[usize]) -> Result<DensityMatrix> {
        qubit::partial_trace(self, keep)
    }
}

impl Reducible for BlockDensityMatrix {
    fn n_sites(&self) -> usize {
        BlockDensityMatrix::n_sites(self)
    }

    fn reduce(&self, keep: &[usize]) -> Result<DensityMatrix> {
        partial_trace_blocked(self, keep)
    }
}

/// Spectrum of the local Hamiltonian on `cells` sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalHamiltonianSpec {
    cells: usize,
}

impl LocalHamiltonianSpec {
    pub fn new(cells: usize) -> Self {
        Self { cells }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Energy of basis index `b`: its excitation count.
    pub fn level(&self, b: usize) -> f64 {
        (b as u32).count_ones() as f64
    }

    /// All `2^M` level energies in ascending order; energy `n` appears `C(M, n)` times.
    pub fn sorted_levels(&self) -> Vec<f64> {
        let mut levels: Vec<f64> = (0..1usize << self.cells).map(|b| self.level(b)).collect();
        levels.sort_by(f64::total_cmp);
        levels
    }

    /// Tr[ρ H₀]
    pub fn energy(&self, rho: &DensityMatrix) -> Result<f64> {
        self.check(rho)?;
        Ok((0..rho.dim()).map(|b| rho.get(b, b).re * self.level(b)).sum())
    }

    fn check(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.n_sites() != self.cells {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.cells,
                found: rho.dim(),
            });
        }
        Ok(())
    }
}

/// Energy stored in the first `m` sites, Tr[ρ_M H₀].
pub fn battery_energy<R: Reducible>(rho: &R, m: usize) -> Result<f64> {
    if m == 0 || m > rho.n_sites() {
        return Err(Error::SiteOutOfRange {
            site: m,
            n_sites: rho.n_sites(),
        });
    }
    let keep: Vec<usize> = (1..=m).collect();
    LocalHamiltonianSpec::new(m).energy(&rho.reduce(&keep)?)
}

/// Excitation probability of site `j`.
pub fn site_energy<R: Reducible>(rho: &R, j: usize) -> Result<f64> {
    let reduced = rho.reduce(&[j])?;
    Ok(reduced.get(1, 1).re)
}

/// Eigenvalues of a Hermitian ρ, block by block when ρ has no coherence
/// between excitation numbers (keeps small blocks at full relative accuracy).
fn spectrum(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let d = rho.dim();
    let count = |i: usize| (i as u32).count_ones();
    let block_diagonal = (0..d).all(|c| (0..d).all(|r| count(r) == count(c) || rho.get(r, c) == C64::new(0.0, 0.0)));
    if !block_diagonal {
        return qubit::hermitian_eigenvalues(rho.matrix());
    }
    let mut values = Vec::with_capacity(d);
    for n in 0..=rho.n_sites() as u32 {
        let idx: Vec<usize> = (0..d).filter(|&i| count(i) == n).collect();
        let block = DMatrix::from_fn(idx.len(), idx.len(), |r, c| rho.get(idx[r], idx[c]));
        values.extend(qubit::hermitian_eigenvalues(&block)?);
    }
    Ok(values)
}

/// Ergotropy of a reduced battery state: its energy minus that of the passive
/// state, which pairs the eigenvalues in descending order with the levels in
/// ascending order.
///
/// Eigenvalues down to `−1e-8` are clipped to zero and the rest rescaled to
/// the original trace; anything more negative is an error.
pub fn ergotropy(rho_m: &DensityMatrix, spec: &LocalHamiltonianSpec) -> Result<f64> {
    spec.check(rho_m)?;
    let mut eig = spectrum(rho_m)?;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -POLICY.eigenvalue_clip {
        return Err(Error::Negativity { value: min });
    }
    let trace = rho_m.trace().re;
    for v in &mut eig {
        *v = v.max(0.0);
    }
    let clipped: f64 = eig.iter().sum();
    if clipped > 0.0 && clipped != trace {
        let scale = trace / clipped;
        for v in &mut eig {
            *v *= scale;
        }
    }
    eig.sort_by(|a, b| b.total_cmp(a));
    let passive: f64 = eig.iter().zip(spec.sorted_levels()).map(|(r, e)| r * e).sum();
    let energy = spec.energy(rho_m)?;
    Ok((energy - passive).max(0.0))
}

/// Γ₀ = 1 − cos(2·kd): decay rate of one atom a distance d from the mirror.
pub fn single_atom_rate(kd: f64) -> f64 {
    1.0 - (2.0 * kd).cos()
}

/// E(τ) = exp(−Γ₀τ)
pub fn single_atom_energy(tau: f64, rate: f64) -> f64 {
    (-rate * tau).exp()
}

/// ℰ(τ) = 2exp(−Γ₀τ) − 1 while Γ₀τ < ln 2, zero afterwards.
pub fn single_atom_ergotropy(tau: f64, rate: f64) -> f64 {
    if rate * tau >= std::f64::consts::LN_2 {
        0.0
    } else {
        2.0 * (-rate * tau).exp() - 1.0
    }
}

/// Battery observables of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryReading {
    pub energy: f64,
    pub ergotropy: f64,
    /// Excitation probability of every site `1..=L`.
    pub site_energies: Vec<f64>,
}

/// Energy, ergotropy of the first `m` sites and all site energies.
pub fn read_battery<R: Reducible>(rho: &R, m: usize) -> Result<BatteryReading> {
    let keep: Vec<usize> = (1..=m).collect();
    let reduced = rho.reduce(&keep)?;
    let spec = LocalHamiltonianSpec::new(m);
    let site_energies = (1..=rho.n_sites())
        .map(|j| site_energy(rho, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(BatteryReading {
        energy: spec.energy(&reduced)?,
        ergotropy: ergotropy(&reduced, &spec)?,
        site_energies,
    })
}
