//! Excitation-number sectors.
//!
//! The collective dynamics conserves the excitation number up to downward
//! jumps, so states that start number-diagonal stay block-diagonal. Each
//! block `n` lives on the `C(L, n)` masks with `n` excitations, listed in
//! ascending mask order.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::policy::POLICY;
use crate::qubit::{self, check_n_sites, check_site, site_bit, transfer_image, DensityMatrix, Side, TraceLayout};
use crate::{C64, Error, Result};

const NO_SECTOR: u32 = u32::MAX;

/// Enumeration of the sectors `0..=max_excitation` of an `L`-site register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    n_sites: usize,
    max_excitation: usize,
    masks: Vec<Vec<u32>>,
    /// Position of every mask inside its own sector, `NO_SECTOR` above the cutoff.
    position: Vec<u32>,
}

impl SectorBasis {
    pub fn new(n_sites: usize, max_excitation: usize) -> Result<Self> {
        check_n_sites(n_sites)?;
        if max_excitation > n_sites {
            return Err(Error::InvalidSystem(format!(
                "max excitation {max_excitation} exceeds atom count {n_sites}"
            )));
        }
        let dim = 1usize << n_sites;
        let mut masks = vec![Vec::new(); max_excitation + 1];
        let mut position = vec![NO_SECTOR; dim];
        for mask in 0..dim as u32 {
            let n = mask.count_ones() as usize;
            if n <= max_excitation {
                position[mask as usize] = masks[n].len() as u32;
                masks[n].push(mask);
            }
        }
        Ok(Self {
            n_sites,
            max_excitation,
            masks,
            position,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn max_excitation(&self) -> usize {
        self.max_excitation
    }

    /// Number of basis states with `n` excitations, `C(L, n)`.
    pub fn sector_dim(&self, n: usize) -> usize {
        self.masks[n].len()
    }

    pub fn sector_dims(&self) -> Vec<usize> {
        self.masks.iter().map(Vec::len).collect()
    }

    pub fn masks(&self, n: usize) -> &[u32] {
        &self.masks[n]
    }

    /// Position of `mask` within its sector, if the sector is represented.
    #[inline]
    pub fn position(&self, mask: u32) -> Option<usize> {
        match self.position[mask as usize] {
            NO_SECTOR => None,
            p => Some(p as usize),
        }
    }
}

/// A density matrix stored as one dense block per excitation sector.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDensityMatrix {
    basis: Arc<SectorBasis>,
    blocks: Vec<DMatrix<C64>>,
}

impl BlockDensityMatrix {
    pub fn zeros(basis: Arc<SectorBasis>) -> Self {
        let blocks = basis
            .sector_dims()
            .into_iter()
            .map(|d| DMatrix::zeros(d, d))
            .collect();
        Self { basis, blocks }
    }

    pub fn from_blocks(basis: Arc<SectorBasis>, blocks: Vec<DMatrix<C64>>) -> Result<Self> {
        let dims = basis.sector_dims();
        if blocks.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                found: blocks.len(),
            });
        }
        for (b, &d) in blocks.iter().zip(&dims) {
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: b.nrows().max(b.ncols()),
                });
            }
        }
        Ok(Self { basis, blocks })
    }

    /// Battery initial condition `|1..1 0..0⟩` with sectors up to `m`.
    pub fn charged(n_sites: usize, m: usize) -> Result<Self> {
        let basis = Arc::new(SectorBasis::new(n_sites, m)?);
        let mut out = Self::zeros(basis);
        let pos = out.basis.position(qubit::low_bits(m)).expect("charged mask in top sector");
        out.blocks[m][(pos, pos)] = C64::new(1.0, 0.0);
        Ok(out)
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn n_sites(&self) -> usize {
        self.basis.n_sites
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn block(&self, n: usize) -> &DMatrix<C64> {
        &self.blocks[n]
    }

    pub fn block_mut(&mut self, n: usize) -> &mut DMatrix<C64> {
        &mut self.blocks[n]
    }

    pub fn into_blocks(self) -> Vec<DMatrix<C64>> {
        self.blocks
    }

    pub fn trace(&self) -> C64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(qubit::hermiticity_error)
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for b in &self.blocks {
            for v in qubit::hermitian_eigenvalues(b)? {
                worst = worst.min(v);
            }
        }
        Ok(worst)
    }

    /// Population of site `site` being excited, Σ over basis states with the bit set.
    pub fn site_population(&self, site: usize) -> Result<f64> {
        check_site(site, self.n_sites())?;
        let bit = site_bit(site);
        Ok(self
            .blocks
            .iter()
            .enumerate()
            .map(|(n, b)| {
                self.basis.masks[n]
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| m & bit != 0)
                    .map(|(i, _)| b[(i, i)].re)
                    .sum::<f64>()
            })
            .sum())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| qubit::max_abs_diff(a.as_slice(), b.as_slice()))
            .fold(0.0, f64::max)
    }
}

/// Splits a full-space ρ into sector blocks `0..=max_excitation`.
///
/// Refuses states carrying coherence between sectors, or weight above the
/// cutoff, larger than the sector tolerance.
pub fn sector_decompose(rho: &DensityMatrix, max_excitation: usize) -> Result<BlockDensityMatrix> {
    let basis = Arc::new(SectorBasis::new(rho.n_sites(), max_excitation)?);
    let d = rho.dim();
    let mut worst = 0.0f64;
    for c in 0..d {
        for r in 0..d {
            let same = (r as u32).count_ones() == (c as u32).count_ones();
            let kept = basis.position[r] != NO_SECTOR;
            if !(same && kept) {
                worst = worst.max(rho.get(r, c).norm());
            }
        }
    }
    if worst > POLICY.sector_coherence {
        return Err(Error::InterSectorCoherence { magnitude: worst });
    }
    let blocks = basis
        .masks
        .iter()
        .map(|ms| {
            DMatrix::from_fn(ms.len(), ms.len(), |r, c| rho.get(ms[r] as usize, ms[c] as usize))
        })
        .collect();
    Ok(BlockDensityMatrix { basis, blocks })
}

/// Inverse of [`sector_decompose`].
pub fn sector_recompose(rho: &BlockDensityMatrix) -> DensityMatrix {
    let n_sites = rho.n_sites();
    let dim = 1usize << n_sites;
    let mut mat = DMatrix::zeros(dim, dim);
    for (n, block) in rho.blocks.iter().enumerate() {
        let ms = &rho.basis.masks[n];
        for c in 0..ms.len() {
            for r in 0..ms.len() {
                mat[(ms[r] as usize, ms[c] as usize)] = block[(r, c)];
            }
        }
    }
    DensityMatrix::from_matrix(n_sites, mat).expect("dimension fixed by basis")
}

/// Sector-blocked counterpart of [`qubit::apply_transfer`].
pub fn apply_transfer_blocked(
    j: usize,
    jp: usize,
    rho: &BlockDensityMatrix,
    side: Side,
) -> Result<BlockDensityMatrix> {
    let n_sites = rho.n_sites();
    check_site(j, n_sites)?;
    check_site(jp, n_sites)?;
    let (jb, jpb) = (site_bit(j), site_bit(jp));
    let mut out = BlockDensityMatrix::zeros(rho.basis.clone());
    for (n, block) in rho.blocks.iter().enumerate() {
        let ms = &rho.basis.masks[n];
        let target = &mut out.blocks[n];
        for (k, &mask) in ms.iter().enumerate() {
            let Some(image) = transfer_image(mask, jb, jpb) else {
                continue;
            };
            let t = rho.basis.position(image).expect("transfer preserves sector");
            match side {
                Side::Left => {
                    for c in 0..ms.len() {
                        target[(t, c)] += block[(k, c)];
                    }
                }
                Side::Right => {
                    for r in 0..ms.len() {
                        target[(r, k)] += block[(r, t)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Sector-blocked counterpart of [`qubit::apply_jump`]; block `n` feeds block `n − 1`.
pub fn apply_jump_blocked(j: usize, jp: usize, rho: &BlockDensityMatrix) -> Result<BlockDensityMatrix> {
    let n_sites = rho.n_sites();
    check_site(j, n_sites)?;
    check_site(jp, n_sites)?;
    let (jb, jpb) = (site_bit(j), site_bit(jp));
    let mut out = BlockDensityMatrix::zeros(rho.basis.clone());
    for n in 1..rho.blocks.len() {
        let src = &rho.blocks[n];
        let ms = &rho.basis.masks[n - 1];
        let target = &mut out.blocks[n - 1];
        for (c, &cm) in ms.iter().enumerate() {
            if cm & jpb != 0 {
                continue;
            }
            let sc = rho.basis.position(cm | jpb).expect("raised mask in next sector");
            for (r, &rm) in ms.iter().enumerate() {
                if rm & jb != 0 {
                    continue;
                }
                let sr = rho.basis.position(rm | jb).expect("raised mask in next sector");
                target[(r, c)] = src[(sr, sc)];
            }
        }
    }
    Ok(out)
}

/// Reduced density matrix on `keep` directly from the blocked form.
pub fn partial_trace_blocked(rho: &BlockDensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let layout = TraceLayout::new(rho.n_sites(), keep)?;
    let dk = 1usize << layout.kept();
    let mut out = DMatrix::zeros(dk, dk);
    for (n, block) in rho.blocks.iter().enumerate() {
        let ms = &rho.basis.masks[n];
        for (c, &cm) in ms.iter().enumerate() {
            let env = layout.env_index(cm);
            let rc = layout.reduced_index(cm);
            for (r, &rm) in ms.iter().enumerate() {
                if layout.env_index(rm) == env {
                    out[(layout.reduced_index(rm), rc)] += block[(r, c)];
                }
            }
        }
    }
    DensityMatrix::from_matrix(layout.kept(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{apply_jump, apply_transfer, partial_trace, BasisState};
    use proptest::prelude::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    /// Random number-diagonal Hermitian PSD state: Σ_n A_n A_n† per sector.
    fn random_blocked(n_sites: usize, max_exc: usize, seed: &[f64]) -> BlockDensityMatrix {
        let basis = Arc::new(SectorBasis::new(n_sites, max_exc).unwrap());
        let mut it = seed.iter().cycle();
        let mut next = || *it.next().unwrap();
        let blocks: Vec<_> = basis
            .sector_dims()
            .into_iter()
            .map(|d| {
                let a = DMatrix::from_fn(d, d, |_, _| C64::new(next(), next()));
                &a * a.adjoint()
            })
            .collect();
        let mut rho = BlockDensityMatrix::from_blocks(basis, blocks).unwrap();
        let tr = rho.trace().re;
        for b in &mut rho.blocks {
            *b /= C64::new(tr, 0.0);
        }
        rho
    }

    #[test]
    fn single_excitation_projector_block() {
        // |egg⟩: site 1 excited
        let rho = DensityMatrix::basis_projector(BasisState::new(3, 0b001).unwrap());
        let blocked = sector_decompose(&rho, 1).unwrap();
        assert_eq!(blocked.basis().sector_dims(), vec![1, 3]);
        let nonzero = blocked.block(1).iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 1);
        assert_eq!(blocked.block(0)[(0, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn charged_state_block_dims_are_binomial() {
        let rho = BlockDensityMatrix::charged(3, 2).unwrap();
        let dims = rho.basis().sector_dims();
        assert_eq!(dims, vec![binom(3, 0), binom(3, 1), binom(3, 2)]);
        assert_eq!(dims, vec![1, 3, 3]);
        assert_eq!(rho.trace(), C64::new(1.0, 0.0));
    }

    #[test]
    fn refuses_inter_sector_coherence() {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix::from_pure(1, &[C64::new(a, 0.0), C64::new(a, 0.0)]).unwrap();
        assert!(matches!(
            sector_decompose(&plus, 1),
            Err(Error::InterSectorCoherence { .. })
        ));
        // weight above the cutoff is also refused
        let ee = DensityMatrix::charged(2, 2).unwrap();
        assert!(sector_decompose(&ee, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn decompose_recompose_round_trip(
            n_sites in 1usize..=5,
            frac in 0.0f64..=1.0,
            seed in prop::collection::vec(-1.0f64..1.0, 16..64),
        ) {
            let max_exc = ((n_sites as f64) * frac).round() as usize;
            let blocked = random_blocked(n_sites, max_exc, &seed);
            let full = sector_recompose(&blocked);
            let again = sector_decompose(&full, max_exc).unwrap();
            prop_assert!(again.max_abs_diff(&blocked) <= 1e-14);
            prop_assert!(sector_recompose(&again).max_abs_diff(&full) <= 1e-14);
        }

        #[test]
        fn blocked_kernels_match_full_space(
            n_sites in 1usize..=5,
            seed in prop::collection::vec(-1.0f64..1.0, 16..64),
            j_raw in 0usize..5,
            jp_raw in 0usize..5,
            keep_mask in 1u32..32,
        ) {
            let (j, jp) = (j_raw % n_sites + 1, jp_raw % n_sites + 1);
            let blocked = random_blocked(n_sites, n_sites, &seed);
            let full = sector_recompose(&blocked);
            for side in [Side::Left, Side::Right] {
                let a = sector_recompose(&apply_transfer_blocked(j, jp, &blocked, side).unwrap());
                let b = apply_transfer(j, jp, &full, side).unwrap();
                prop_assert!(a.max_abs_diff(&b) <= 1e-12);
            }
            let a = sector_recompose(&apply_jump_blocked(j, jp, &blocked).unwrap());
            let b = apply_jump(j, jp, &full).unwrap();
            prop_assert!(a.max_abs_diff(&b) <= 1e-12);

            let keep: Vec<usize> = (1..=n_sites).filter(|s| keep_mask >> (s - 1) & 1 == 1).collect();
            prop_assume!(!keep.is_empty());
            let a = partial_trace_blocked(&blocked, &keep).unwrap();
            let b = partial_trace(&full, &keep).unwrap();
            prop_assert!(a.max_abs_diff(&b) <= 1e-12);
        }
    }

    #[test]
    fn site_population_matches_partial_trace() {
        let seed: Vec<f64> = (0..50).map(|i| ((i * 37 % 17) as f64 / 17.0) - 0.5).collect();
        let rho = random_blocked(4, 3, &seed);
        for site in 1..=4 {
            let red = partial_trace_blocked(&rho, &[site]).unwrap();
            assert!((rho.site_population(site).unwrap() - red.get(1, 1).re).abs() < 1e-14);
        }
    }
}
