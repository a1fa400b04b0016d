//! Atoms in front of a mirror: geometry, collective rates and the
//! master-equation generator.
//!
//! With positions `z_j` (in units of the lattice spacing `d`) and phase
//! `kd = k₁D·d`, the effective non-Hermitian Hamiltonian is
//! `H = Σ_{jj'} h_{jj'} σ_eg^j σ_ge^{j'}` with
//!
//! ```text
//! h_{jj'} = −(i/2) (exp(−i·kd·|z_j − z_j'|) − exp(−i·kd·(z_j + z_j')))
//! Γ_{jj'} = cos(kd·|z_j − z_j'|) − cos(kd·(z_j + z_j'))
//!         = 2 sin(kd·z_j) sin(kd·z_j')
//! ```
//!
//! and `dρ/dt = −i(Hρ − ρH†) + Σ_{jj'} Γ_{jj'} σ_ge^j ρ σ_eg^{j'}`. The rank-1
//! form of Γ means the dissipator has a single collective jump operator
//! `c = Σ_j v_j σ_ge^j` with `v_j = √2 sin(kd·z_j)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::qubit::{self, add_jump, add_transfer, check_n_sites, site_bit, DensityMatrix, Side};
use crate::sector::SectorBasis;
use crate::sparse::CsrMatrix;
use crate::{C64, Error, Result};

/// Largest array the experiments accept.
pub const MAX_ATOMS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arrangement {
    /// `z_j = j`
    Ordered,
    /// `z_j = j + ε_j`, `ε_j` uniform in `[−1/2, 1/2]`
    Disordered,
}

impl Arrangement {
    pub fn name(self) -> &'static str {
        match self {
            Arrangement::Ordered => "ordered",
            Arrangement::Disordered => "disordered",
        }
    }
}

impl std::str::FromStr for Arrangement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ordered" => Ok(Arrangement::Ordered),
            "disordered" => Ok(Arrangement::Disordered),
            other => Err(Error::InvalidSystem(format!("unknown arrangement '{other}'"))),
        }
    }
}

/// Immutable description of one experiment.
///
/// The initial state always has the `battery_size` atoms nearest the mirror
/// fully excited and every other atom in its ground state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSpec {
    n_atoms: usize,
    battery_size: usize,
    kd: f64,
    arrangement: Arrangement,
}

impl SystemSpec {
    pub fn new(n_atoms: usize, battery_size: usize, kd: f64, arrangement: Arrangement) -> Result<Self> {
        if n_atoms == 0 || n_atoms > MAX_ATOMS {
            return Err(Error::InvalidSystem(format!(
                "atom count {n_atoms} outside 1..={MAX_ATOMS}"
            )));
        }
        if battery_size == 0 || battery_size > n_atoms {
            return Err(Error::InvalidSystem(format!(
                "battery size {battery_size} outside 1..={n_atoms}"
            )));
        }
        if !(kd.is_finite() && kd > 0.0) {
            return Err(Error::InvalidSystem(format!("spacing phase {kd} must be finite and positive")));
        }
        Ok(Self {
            n_atoms,
            battery_size,
            kd,
            arrangement,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn battery_size(&self) -> usize {
        self.battery_size
    }

    /// Dimensionless spacing `k₁D·d`.
    pub fn kd(&self) -> f64 {
        self.kd
    }

    pub fn arrangement(&self) -> Arrangement {
        self.arrangement
    }

    pub fn with_n_atoms(&self, n_atoms: usize) -> Result<Self> {
        Self::new(n_atoms, self.battery_size, self.kd, self.arrangement)
    }

    pub fn with_kd(&self, kd: f64) -> Result<Self> {
        Self::new(self.n_atoms, self.battery_size, kd, self.arrangement)
    }

    pub fn with_arrangement(&self, arrangement: Arrangement) -> Self {
        Self { arrangement, ..*self }
    }

    pub fn initial_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::charged(self.n_atoms, self.battery_size)
    }
}

/// Atom positions in units of the lattice spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    positions: Vec<f64>,
    epsilons: Vec<f64>,
}

impl Geometry {
    /// Arbitrary positive positions, no disorder bookkeeping.
    pub fn from_positions(positions: Vec<f64>) -> Result<Self> {
        check_n_sites(positions.len())?;
        if let Some(bad) = positions.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(Error::InvalidSystem(format!("position {bad} must be finite and positive")));
        }
        let epsilons = vec![0.0; positions.len()];
        Ok(Self { positions, epsilons })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }
}

/// Positions for `spec`: `z_j = j` when ordered, `z_j = j + ε_j` when disordered.
pub fn build_geometry(spec: &SystemSpec, epsilons: Option<&[f64]>) -> Result<Geometry> {
    let l = spec.n_atoms;
    let eps = match (spec.arrangement, epsilons) {
        (Arrangement::Ordered, None) => vec![0.0; l],
        (Arrangement::Ordered, Some(_)) => return Err(Error::UnexpectedEpsilons),
        (Arrangement::Disordered, None) => {
            return Err(Error::LengthMismatch { expected: l, found: 0 })
        }
        (Arrangement::Disordered, Some(e)) => {
            if e.len() != l {
                return Err(Error::LengthMismatch {
                    expected: l,
                    found: e.len(),
                });
            }
            for (i, &v) in e.iter().enumerate() {
                if !(-0.5..=0.5).contains(&v) {
                    return Err(Error::EpsilonOutOfRange { site: i + 1, value: v });
                }
            }
            e.to_vec()
        }
    };
    let positions = eps.iter().enumerate().map(|(i, e)| (i + 1) as f64 + e).collect();
    Ok(Geometry {
        positions,
        epsilons: eps,
    })
}

/// Precomputed coefficients of the master equation for one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladGenerator {
    h: DMatrix<C64>,
    gamma: DMatrix<f64>,
    jump: DVector<f64>,
}

impl LindbladGenerator {
    pub fn new(geometry: &Geometry, kd: f64) -> Self {
        let z = &geometry.positions;
        let l = z.len();
        let q = kd / PI;
        let h = DMatrix::from_fn(l, l, |j, jp| {
            let (cn, sn) = cos_sin_pi(q * (z[j] - z[jp]).abs());
            let (cf, sf) = cos_sin_pi(q * (z[j] + z[jp]));
            // e^{−iφ} = cos φ − i sin φ
            C64::new(cn - cf, sf - sn) * C64::new(0.0, -0.5)
        });
        let gamma = DMatrix::from_fn(l, l, |j, jp| {
            cos_sin_pi(q * (z[j] - z[jp]).abs()).0 - cos_sin_pi(q * (z[j] + z[jp])).0
        });
        let jump = DVector::from_fn(l, |j, _| std::f64::consts::SQRT_2 * cos_sin_pi(q * z[j]).1);
        Self { h, gamma, jump }
    }

    pub fn n_atoms(&self) -> usize {
        self.jump.len()
    }

    /// Coefficients `h_{jj'}` of σ_eg^j σ_ge^{j'} in the effective Hamiltonian.
    pub fn hamiltonian(&self) -> &DMatrix<C64> {
        &self.h
    }

    /// Collective decay matrix Γ.
    pub fn decay(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// `v` with Γ = v vᵀ.
    pub fn jump_vector(&self) -> &DVector<f64> {
        &self.jump
    }

    fn check_state(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.n_sites() != self.n_atoms() {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.n_atoms(),
                found: rho.dim(),
            });
        }
        Ok(())
    }

    /// dρ/dt from the double sum over site pairs, one kernel call per term.
    pub fn lindblad_rhs(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_state(rho)?;
        let l = self.n_atoms();
        let mut out = DensityMatrix::zeros(l)?;
        let minus_i = C64::new(0.0, -1.0);
        for j in 1..=l {
            for jp in 1..=l {
                let h = self.h[(j - 1, jp - 1)];
                // H† contains conj(h_{jj'}) σ_eg^{j'} σ_ge^j
                add_transfer(j, jp, rho, Side::Left, minus_i * h, out.matrix_mut())?;
                add_transfer(jp, j, rho, Side::Right, -(minus_i * h.conj()), out.matrix_mut())?;
                let g = self.gamma[(j - 1, jp - 1)];
                if g != 0.0 {
                    add_jump(j, jp, rho, C64::new(g, 0.0), out.matrix_mut())?;
                }
            }
        }
        Ok(out)
    }

    /// Same contract as [`Self::lindblad_rhs`], using the collective jump operator.
    pub fn rhs_rank1(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_state(rho)?;
        let ops = FullSpaceOperators::new(self);
        let mut out = DensityMatrix::zeros(self.n_atoms())?;
        ops.apply(rho.matrix().as_slice(), out.matrix_mut().as_mut_slice());
        Ok(out)
    }

    /// Sparse sector operators for sectors `0..=max_excitation`.
    pub fn compile_sectors(&self, max_excitation: usize) -> Result<SectorOperators> {
        let basis = Arc::new(SectorBasis::new(self.n_atoms(), max_excitation)?);
        let hamiltonian = (0..=max_excitation)
            .map(|n| {
                let masks = basis.masks(n);
                CsrMatrix::from_rows(masks.len(), masks.len(), |r| {
                    hamiltonian_row(&self.h, self.n_atoms(), masks[r])
                        .map(|(m, v)| (basis.position(m).expect("same sector"), v))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let lowering = (1..=max_excitation)
            .map(|n| {
                let rows = basis.masks(n - 1);
                CsrMatrix::from_rows(rows.len(), basis.sector_dim(n), |r| {
                    lowering_row(&self.jump, self.n_atoms(), rows[r])
                        .map(|(m, v)| (basis.position(m).expect("next sector"), v))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        Ok(SectorOperators {
            basis,
            hamiltonian,
            lowering,
        })
    }
}

/// Builds the generator for `geometry` with the spacing phase of `spec`.
pub fn build_generator(geometry: &Geometry, spec: &SystemSpec) -> Result<LindbladGenerator> {
    if geometry.n_atoms() != spec.n_atoms {
        return Err(Error::LengthMismatch {
            expected: spec.n_atoms,
            found: geometry.n_atoms(),
        });
    }
    Ok(LindbladGenerator::new(geometry, spec.kd))
}

/// Nonzeros `(column mask, value)` of row `mask` of H: ⟨mask|H|col⟩.
fn hamiltonian_row(h: &DMatrix<C64>, l: usize, mask: u32) -> impl Iterator<Item = (u32, C64)> + '_ {
    let diag: C64 = (1..=l)
        .filter(move |&j| mask & site_bit(j) != 0)
        .map(|j| h[(j - 1, j - 1)])
        .sum();
    let hops = (1..=l).flat_map(move |j| {
        (1..=l).filter_map(move |jp| {
            let (jb, jpb) = (site_bit(j), site_bit(jp));
            // σ_eg^j σ_ge^{jp} maps col = mask − j + jp onto mask
            (j != jp && mask & jb != 0 && mask & jpb == 0)
                .then(|| ((mask & !jb) | jpb, h[(j - 1, jp - 1)]))
        })
    });
    std::iter::once((mask, diag)).chain(hops)
}

/// Nonzeros of row `mask` of c = Σ_j v_j σ_ge^j.
fn lowering_row(v: &DVector<f64>, l: usize, mask: u32) -> impl Iterator<Item = (u32, C64)> + '_ {
    (1..=l)
        .filter(move |&j| mask & site_bit(j) == 0)
        .map(move |j| (mask | site_bit(j), C64::new(v[j - 1], 0.0)))
}

/// Full-space sparse H and collective jump operator.
#[derive(Debug, Clone)]
pub(crate) struct FullSpaceOperators {
    dim: usize,
    h: CsrMatrix,
    c: CsrMatrix,
}

impl FullSpaceOperators {
    pub(crate) fn new(gen: &LindbladGenerator) -> Self {
        let l = gen.n_atoms();
        let dim = 1usize << l;
        let h = CsrMatrix::from_rows(dim, dim, |r| {
            hamiltonian_row(&gen.h, l, r as u32)
                .map(|(m, v)| (m as usize, v))
                .collect::<Vec<_>>()
        });
        let c = CsrMatrix::from_rows(dim, dim, |r| {
            lowering_row(&gen.jump, l, r as u32)
                .map(|(m, v)| (m as usize, v))
                .collect::<Vec<_>>()
        });
        Self { dim, h, c }
    }

    /// out = −i(Hρ − ρH†) + cρc†, for any (not necessarily Hermitian) ρ.
    pub(crate) fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        let minus_i = C64::new(0.0, -1.0);
        out.fill(C64::new(0.0, 0.0));
        self.h.mul_dense_acc(rho, d, out, minus_i);
        self.h.dense_mul_adjoint_acc(rho, d, out, -minus_i);
        let mut t = vec![C64::new(0.0, 0.0); d * d];
        self.c.mul_dense_acc(rho, d, &mut t, C64::new(1.0, 0.0));
        self.c.dense_mul_adjoint_acc(&t, d, out, C64::new(1.0, 0.0));
    }
}

/// Per-sector sparse blocks of H and of the collective lowering operator.
#[derive(Debug, Clone)]
pub struct SectorOperators {
    basis: Arc<SectorBasis>,
    hamiltonian: Vec<CsrMatrix>,
    /// `lowering[n − 1]` maps sector `n` to sector `n − 1`.
    lowering: Vec<CsrMatrix>,
}

impl SectorOperators {
    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub(crate) fn hamiltonian(&self, n: usize) -> &CsrMatrix {
        &self.hamiltonian[n]
    }

    pub(crate) fn lowering(&self, n: usize) -> &CsrMatrix {
        &self.lowering[n - 1]
    }
}

/// (cos πx, sin πx), exact at multiples of 1/2.
///
/// Phases within a few ulps of a node or antinode are snapped onto it, so
/// Bragg spacings give an exactly vanishing dissipator.
fn cos_sin_pi(x: f64) -> (f64, f64) {
    let r = x.rem_euclid(2.0);
    let quarter = (2.0 * r).round();
    if (2.0 * r - quarter).abs() <= 8.0 * f64::EPSILON * x.abs().max(1.0) {
        return match quarter as i64 % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let (s, c) = (PI * r).sin_cos();
    (c, s)
}

/// Largest |Γ_{jj'} − v_j v_{j'}|.
pub fn rank1_residual(gen: &LindbladGenerator) -> f64 {
    let v = &gen.jump;
    let l = gen.n_atoms();
    let mut worst = 0.0f64;
    for j in 0..l {
        for jp in 0..l {
            worst = worst.max((gen.gamma[(j, jp)] - v[j] * v[jp]).abs());
        }
    }
    worst
}

/// Largest |−2·Im h_{jj'} − Γ_{jj'}|.
pub fn anti_hermitian_residual(gen: &LindbladGenerator) -> f64 {
    gen.h
        .iter()
        .zip(gen.gamma.iter())
        .map(|(h, g)| (-2.0 * h.im - g).abs())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of Γ.
pub fn decay_min_eigenvalue(gen: &LindbladGenerator) -> f64 {
    let sym = (&gen.gamma + gen.gamma.transpose()) * 0.5;
    nalgebra::linalg::SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Σ_j |e⟩⟨e|_j applied as Tr[N̂ X].
pub fn excitation_number_expectation(x: &DensityMatrix) -> C64 {
    (0..x.dim())
        .map(|i| x.get(i, i) * (i as u32).count_ones() as f64)
        .sum()
}

#[doc(hidden)]
pub fn qubit_permutation_matrix(perm: &[usize]) -> DMatrix<C64> {
    // site perm[k] of the original register becomes site k + 1
    let l = perm.len();
    let dim = 1usize << l;
    let mut p = DMatrix::zeros(dim, dim);
    for mask in 0..dim as u32 {
        let image = (0..l)
            .filter(|&k| mask & qubit::site_bit(perm[k]) != 0)
            .fold(0u32, |acc, k| acc | 1 << k);
        p[(image as usize, mask as usize)] = C64::new(1.0, 0.0);
    }
    p
}
