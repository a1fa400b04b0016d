//! Full-space multi-qubit states and the bitmask operator kernels.
//!
//! Sites are numbered `1..=L`, site 1 being nearest the mirror. Bit `j - 1`
//! of a basis mask is set when atom `j` is excited. Operators are never
//! materialized: each kernel is an index map on basis masks.

use nalgebra::DMatrix;

use crate::policy::POLICY;
use crate::{C64, Error, Result};

/// Largest atom count accepted by any constructor.
pub const MAX_SITES: usize = 16;

/// A computational basis state: an occupation bitmask over `L` sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    mask: u32,
    n_sites: u8,
}

impl BasisState {
    pub fn new(n_sites: usize, mask: u32) -> Result<Self> {
        check_n_sites(n_sites)?;
        if (mask as u64) >= (1u64 << n_sites) {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_sites,
                found: mask as usize,
            });
        }
        Ok(Self {
            mask,
            n_sites: n_sites as u8,
        })
    }

    /// State with sites `1..=m` excited and the rest in the ground state.
    pub fn first_excited(n_sites: usize, m: usize) -> Result<Self> {
        if m > n_sites {
            return Err(Error::SiteOutOfRange { site: m, n_sites });
        }
        Self::new(n_sites, low_bits(m))
    }

    pub fn mask(self) -> u32 {
        self.mask
    }

    pub fn n_sites(self) -> usize {
        self.n_sites as usize
    }

    pub fn excitation_count(self) -> usize {
        self.mask.count_ones() as usize
    }

    /// Whether atom `site` (1-based) is excited.
    pub fn is_excited(self, site: usize) -> bool {
        self.mask & site_bit(site) != 0
    }
}

/// Which side of ρ an operator multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A density matrix over the full `2^L` dimensional atomic space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_sites: usize,
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_matrix(n_sites: usize, mat: DMatrix<C64>) -> Result<Self> {
        check_n_sites(n_sites)?;
        let dim = 1usize << n_sites;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: mat.nrows().max(mat.ncols()),
            });
        }
        Ok(Self { n_sites, mat })
    }

    pub fn zeros(n_sites: usize) -> Result<Self> {
        check_n_sites(n_sites)?;
        let dim = 1usize << n_sites;
        Ok(Self {
            n_sites,
            mat: DMatrix::zeros(dim, dim),
        })
    }

    /// The projector |b⟩⟨b| on a basis state.
    pub fn basis_projector(state: BasisState) -> Self {
        let n_sites = state.n_sites();
        let dim = 1usize << n_sites;
        let mut mat = DMatrix::zeros(dim, dim);
        mat[(state.mask() as usize, state.mask() as usize)] = C64::new(1.0, 0.0);
        Self { n_sites, mat }
    }

    /// Pure state |ψ⟩⟨ψ| from amplitudes indexed by basis mask; not normalized.
    pub fn from_pure(n_sites: usize, amplitudes: &[C64]) -> Result<Self> {
        check_n_sites(n_sites)?;
        let dim = 1usize << n_sites;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        let mat = DMatrix::from_fn(dim, dim, |r, c| amplitudes[r] * amplitudes[c].conj());
        Ok(Self { n_sites, mat })
    }

    /// Battery initial condition: sites `1..=m` excited, the rest ground.
    pub fn charged(n_sites: usize, m: usize) -> Result<Self> {
        Ok(Self::basis_projector(BasisState::first_excited(n_sites, m)?))
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ_mn ρ_mn ρ_nm
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..d {
            for c in 0..d {
                acc += self.mat[(r, c)] * self.mat[(c, r)];
            }
        }
        acc.re
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n_sites: self.n_sites,
            mat: self.mat.adjoint(),
        }
    }

    /// max |ρ_mn − conj(ρ_nm)|
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.mat)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_error() <= POLICY.hermiticity
    }

    /// ρ ← (ρ + ρ†)/2
    pub fn hermitize(&mut self) {
        let d = self.dim();
        hermitize_in_place(self.mat.as_mut_slice(), d);
    }

    /// Population of each basis state.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigenvalues(&self.mat)?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }

    /// Largest entrywise modulus difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(self.mat.as_slice(), other.mat.as_slice())
    }

    fn check_site(&self, site: usize) -> Result<()> {
        check_site(site, self.n_sites)
    }
}

pub(crate) fn check_n_sites(n_sites: usize) -> Result<()> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::InvalidSystem(format!(
            "atom count {n_sites} outside 1..={MAX_SITES}"
        )));
    }
    Ok(())
}

pub(crate) fn check_site(site: usize, n_sites: usize) -> Result<()> {
    if site == 0 || site > n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    Ok(())
}

#[inline]
pub(crate) fn site_bit(site: usize) -> u32 {
    1u32 << (site - 1)
}

#[inline]
pub(crate) fn low_bits(m: usize) -> u32 {
    if m >= 32 {
        u32::MAX
    } else {
        (1u32 << m) - 1
    }
}

/// Image of `mask` under σ_eg^j σ_ge^{jp}, or `None` if the operator annihilates it.
#[inline]
pub(crate) fn transfer_image(mask: u32, j_bit: u32, jp_bit: u32) -> Option<u32> {
    if mask & jp_bit == 0 {
        return None;
    }
    let lowered = mask & !jp_bit;
    if lowered & j_bit != 0 {
        return None;
    }
    Some(lowered | j_bit)
}

/// (σ_eg^j σ_ge^{jp}) ρ for `Side::Left`, ρ (σ_eg^j σ_ge^{jp}) for `Side::Right`.
pub fn apply_transfer(j: usize, jp: usize, rho: &DensityMatrix, side: Side) -> Result<DensityMatrix> {
    let mut out = DMatrix::zeros(rho.dim(), rho.dim());
    add_transfer(j, jp, rho, side, C64::new(1.0, 0.0), &mut out)?;
    Ok(DensityMatrix {
        n_sites: rho.n_sites,
        mat: out,
    })
}

/// `out += coef · apply_transfer(j, jp, rho, side)` without the temporary.
pub(crate) fn add_transfer(
    j: usize,
    jp: usize,
    rho: &DensityMatrix,
    side: Side,
    coef: C64,
    out: &mut DMatrix<C64>,
) -> Result<()> {
    rho.check_site(j)?;
    rho.check_site(jp)?;
    let (jb, jpb) = (site_bit(j), site_bit(jp));
    let d = rho.dim();
    match side {
        Side::Left => {
            let images: Vec<(usize, usize)> = (0..d)
                .filter_map(|k| transfer_image(k as u32, jb, jpb).map(|r| (k, r as usize)))
                .collect();
            let src = rho.mat.as_slice();
            for (c, dst) in out.as_mut_slice().chunks_exact_mut(d).enumerate() {
                let col = &src[c * d..(c + 1) * d];
                for &(k, r) in &images {
                    dst[r] += coef * col[k];
                }
            }
        }
        Side::Right => {
            // (ρ O)[r, c] = ρ[r, k] with O|c⟩ = |k⟩
            let src = rho.mat.as_slice();
            for (c, dst) in out.as_mut_slice().chunks_exact_mut(d).enumerate() {
                if let Some(k) = transfer_image(c as u32, jb, jpb) {
                    let k = k as usize;
                    for (o, x) in dst.iter_mut().zip(&src[k * d..(k + 1) * d]) {
                        *o += coef * x;
                    }
                }
            }
        }
    }
    Ok(())
}

/// σ_ge^j ρ σ_eg^{jp}: the recycling term of the dissipator.
pub fn apply_jump(j: usize, jp: usize, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let mut out = DMatrix::zeros(rho.dim(), rho.dim());
    add_jump(j, jp, rho, C64::new(1.0, 0.0), &mut out)?;
    Ok(DensityMatrix {
        n_sites: rho.n_sites,
        mat: out,
    })
}

/// `out += coef · apply_jump(j, jp, rho)` without the temporary.
pub(crate) fn add_jump(j: usize, jp: usize, rho: &DensityMatrix, coef: C64, out: &mut DMatrix<C64>) -> Result<()> {
    rho.check_site(j)?;
    rho.check_site(jp)?;
    let (jb, jpb) = (site_bit(j), site_bit(jp));
    let d = rho.dim();
    let src = rho.mat.as_slice();
    for (c, dst) in out.as_mut_slice().chunks_exact_mut(d).enumerate() {
        if c as u32 & jpb != 0 {
            continue;
        }
        let col = &src[(c | jpb as usize) * d..][..d];
        for r in (0..d).filter(|r| *r as u32 & jb == 0) {
            dst[r] += coef * col[r | jb as usize];
        }
    }
    Ok(())
}

/// Splits masks into kept and traced parts for a partial trace.
pub(crate) struct TraceLayout {
    keep_bits: Vec<u32>,
    env_bits: Vec<u32>,
}

impl TraceLayout {
    pub(crate) fn new(n_sites: usize, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        let mut seen = 0u32;
        for &site in keep {
            check_site(site, n_sites)?;
            let bit = site_bit(site);
            if seen & bit != 0 {
                return Err(Error::DuplicateSite(site));
            }
            seen |= bit;
        }
        let keep_bits = keep.iter().map(|&s| site_bit(s)).collect();
        let env_bits = (1..=n_sites)
            .map(site_bit)
            .filter(|b| seen & b == 0)
            .collect();
        Ok(Self {
            keep_bits,
            env_bits,
        })
    }

    pub(crate) fn kept(&self) -> usize {
        self.keep_bits.len()
    }

    pub(crate) fn traced(&self) -> usize {
        self.env_bits.len()
    }

    /// Full mask from a reduced index (bit i ↔ `keep[i]`) and an environment index.
    #[inline]
    pub(crate) fn compose(&self, reduced: usize, env: usize) -> u32 {
        scatter(reduced, &self.keep_bits) | scatter(env, &self.env_bits)
    }

    /// Reduced index of a full mask.
    #[inline]
    pub(crate) fn reduced_index(&self, mask: u32) -> usize {
        gather(mask, &self.keep_bits)
    }

    /// Environment index of a full mask.
    #[inline]
    pub(crate) fn env_index(&self, mask: u32) -> usize {
        gather(mask, &self.env_bits)
    }
}

#[inline]
fn scatter(index: usize, bits: &[u32]) -> u32 {
    bits.iter()
        .enumerate()
        .filter(|(i, _)| index >> i & 1 == 1)
        .fold(0, |acc, (_, b)| acc | b)
}

#[inline]
fn gather(mask: u32, bits: &[u32]) -> usize {
    bits.iter()
        .enumerate()
        .filter(|(_, &b)| mask & b != 0)
        .fold(0, |acc, (i, _)| acc | 1 << i)
}

/// Reduced density matrix on `keep`; bit `i` of the result basis encodes `keep[i]`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let layout = TraceLayout::new(rho.n_sites, keep)?;
    let dk = 1usize << layout.kept();
    let de = 1usize << layout.traced();
    let mut out = DMatrix::zeros(dk, dk);
    for c in 0..dk {
        for r in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for e in 0..de {
                acc += rho.mat[(
                    layout.compose(r, e) as usize,
                    layout.compose(c, e) as usize,
                )];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(DensityMatrix {
        n_sites: layout.kept(),
        mat: out,
    })
}

pub(crate) fn hermiticity_error(mat: &DMatrix<C64>) -> f64 {
    let d = mat.nrows();
    let mut worst = 0.0f64;
    for c in 0..d {
        for r in 0..=c {
            worst = worst.max((mat[(r, c)] - mat[(c, r)].conj()).norm());
        }
    }
    worst
}

/// (A + A†)/2 on a column-major square slice.
pub(crate) fn hermitize_in_place(data: &mut [C64], d: usize) {
    for c in 0..d {
        let diag = &mut data[c + c * d];
        diag.im = 0.0;
        for r in 0..c {
            let upper = data[r + c * d];
            let lower = data[c + r * d];
            let avg = (upper + lower.conj()) * 0.5;
            data[r + c * d] = avg;
            data[c + r * d] = avg.conj();
        }
    }
}

pub(crate) fn hermitian_eigenvalues(mat: &DMatrix<C64>) -> Result<Vec<f64>> {
    if mat.nrows() == 0 {
        return Ok(Vec::new());
    }
    if mat.nrows() == 1 {
        return Ok(vec![mat[(0, 0)].re]);
    }
    let herm = (mat + mat.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::linalg::SymmetricEigen::try_new(herm, f64::EPSILON, 0)
        .ok_or(Error::EigenFailure)?;
    Ok(eig.eigenvalues.iter().copied().collect())
}

pub(crate) fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
