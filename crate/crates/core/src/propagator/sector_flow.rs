//! Sector-blocked propagation.
//!
//! Nothing feeds the highest represented sector, so its block obeys
//! dρ_top/dt = −i(H ρ_top − ρ_top H†) and stays of the form ΨΨ† with
//! dΨ/dt = −iHΨ. That block is carried as the `dim_top × rank` factor Ψ
//! (rank 1 for the charged battery); every lower sector is a dense Hermitian
//! block fed by the collective jump from the sector above.

use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use super::{Flow, OdeState};
use crate::model::{LindbladGenerator, SectorOperators};
use crate::policy::POLICY;
use crate::qubit::{self, hermitize_in_place};
use crate::sector::{BlockDensityMatrix, SectorBasis};
use crate::{C64, Error, Result};

/// Blocked density matrix with the top sector stored as a factor Ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    basis: Arc<SectorBasis>,
    rank: usize,
    /// `offsets[n]` starts block `n` for `n < top`; `offsets[top]` starts Ψ.
    offsets: Vec<usize>,
    data: Vec<C64>,
}

impl SectorState {
    fn layout(basis: &SectorBasis, rank: usize) -> (Vec<usize>, usize) {
        let top = basis.max_excitation();
        let mut offsets = Vec::with_capacity(top + 1);
        let mut at = 0;
        for n in 0..top {
            offsets.push(at);
            at += basis.sector_dim(n).pow(2);
        }
        offsets.push(at);
        at += basis.sector_dim(top) * rank;
        (offsets, at)
    }

    fn empty(basis: Arc<SectorBasis>, rank: usize) -> Self {
        let (offsets, len) = Self::layout(&basis, rank);
        Self {
            basis,
            rank,
            offsets,
            data: vec![C64::new(0.0, 0.0); len],
        }
    }

    /// The battery initial condition: sites `1..=m` excited, rank-1 factor.
    pub fn charged(n_sites: usize, m: usize) -> Result<Self> {
        let basis = Arc::new(SectorBasis::new(n_sites, m)?);
        let pos = basis.position(qubit::low_bits(m)).expect("charged mask in top sector");
        let mut out = Self::empty(basis, 1);
        out.top_factor_mut()[(pos, 0)] = C64::new(1.0, 0.0);
        Ok(out)
    }

    /// Factorizes the top block of `rho` through its eigen-decomposition.
    pub fn from_blocks(rho: &BlockDensityMatrix) -> Result<Self> {
        let basis = rho.basis().clone();
        let top = basis.max_excitation();
        let top_block = rho.block(top);
        let herm = (top_block + top_block.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::linalg::SymmetricEigen::try_new(herm, f64::EPSILON, 0)
            .ok_or(Error::EigenFailure)?;
        if let Some(&min) = eig.eigenvalues.iter().find(|&&v| v < -POLICY.eigenvalue_clip) {
            return Err(Error::Negativity { value: min });
        }
        let kept: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > 0.0)
            .collect();
        let mut out = Self::empty(basis, kept.len());
        {
            let mut psi = out.top_factor_mut();
            for (col, &i) in kept.iter().enumerate() {
                let s = eig.eigenvalues[i].sqrt();
                for r in 0..psi.nrows() {
                    psi[(r, col)] = eig.eigenvectors[(r, i)] * s;
                }
            }
        }
        for n in 0..top {
            out.block_mut(n).copy_from(rho.block(n));
        }
        Ok(out)
    }

    /// Materializes every block, the top one as ΨΨ†.
    pub fn to_blocks(&self) -> BlockDensityMatrix {
        let top = self.top();
        let mut blocks: Vec<DMatrix<C64>> = (0..top).map(|n| self.block(n).into_owned()).collect();
        let psi = self.top_factor();
        blocks.push(psi * psi.adjoint());
        BlockDensityMatrix::from_blocks(self.basis.clone(), blocks).expect("layout matches basis")
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    fn top(&self) -> usize {
        self.basis.max_excitation()
    }

    /// Dense block of sector `n` below the top.
    pub fn block(&self, n: usize) -> DMatrixView<'_, C64> {
        assert!(n < self.top(), "top sector is stored factored");
        let d = self.basis.sector_dim(n);
        DMatrixView::from_slice(&self.data[self.offsets[n]..self.offsets[n] + d * d], d, d)
    }

    fn block_mut(&mut self, n: usize) -> DMatrixViewMut<'_, C64> {
        let d = self.basis.sector_dim(n);
        let at = self.offsets[n];
        DMatrixViewMut::from_slice(&mut self.data[at..at + d * d], d, d)
    }

    /// Ψ with ρ_top = ΨΨ†.
    pub fn top_factor(&self) -> DMatrixView<'_, C64> {
        let d = self.basis.sector_dim(self.top());
        let at = self.offsets[self.top()];
        DMatrixView::from_slice(&self.data[at..], d, self.rank)
    }

    fn top_factor_mut(&mut self) -> DMatrixViewMut<'_, C64> {
        let d = self.basis.sector_dim(self.top());
        let at = self.offsets[self.top()];
        let rank = self.rank;
        DMatrixViewMut::from_slice(&mut self.data[at..], d, rank)
    }
}

impl OdeState for SectorState {
    fn data(&self) -> &[C64] {
        &self.data
    }

    fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    fn hermitize(&mut self) {
        for n in 0..self.top() {
            let d = self.basis.sector_dim(n);
            let at = self.offsets[n];
            hermitize_in_place(&mut self.data[at..at + d * d], d);
        }
    }

    fn hermiticity_error(&self) -> f64 {
        (0..self.top())
            .map(|n| qubit::hermiticity_error(&self.block(n).into_owned()))
            .fold(0.0, f64::max)
    }

    fn trace(&self) -> C64 {
        let lower: C64 = (0..self.top()).map(|n| self.block(n).trace()).sum();
        let top: f64 = self.top_factor().iter().map(|z| z.norm_sqr()).sum();
        lower + top
    }

    fn min_eigenvalue(&self) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for n in 0..self.top() {
            for v in qubit::hermitian_eigenvalues(&self.block(n).into_owned())? {
                worst = worst.min(v);
            }
        }
        let psi = self.top_factor();
        let top_min = if self.rank < psi.nrows() {
            0.0
        } else {
            let gram = psi.adjoint() * psi;
            qubit::hermitian_eigenvalues(&gram)?
                .into_iter()
                .fold(f64::INFINITY, f64::min)
        };
        Ok(worst.min(top_min))
    }
}

/// Blocked master-equation flow for states confined to sectors `0..=top`.
///
/// The lower-block update uses ρ H† = (H ρ)†, so it assumes Hermitian lower
/// blocks; the propagator keeps them Hermitian.
#[derive(Debug, Clone)]
pub struct SectorFlow {
    ops: SectorOperators,
}

impl SectorFlow {
    pub fn new(generator: &LindbladGenerator, max_excitation: usize) -> Result<Self> {
        Ok(Self {
            ops: generator.compile_sectors(max_excitation)?,
        })
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        self.ops.basis()
    }
}

impl Flow for SectorFlow {
    type State = SectorState;

    fn rhs(&self, state: &SectorState, out: &mut SectorState) {
        let basis = self.ops.basis();
        let top = basis.max_excitation();
        let rank = state.rank;
        let minus_i = C64::new(0.0, -1.0);
        let zero = C64::new(0.0, 0.0);
        out.data.fill(zero);

        // dΨ = −i H Ψ
        let psi_at = state.offsets[top];
        let (lower_out, psi_out) = out.data.split_at_mut(psi_at);
        let psi = &state.data[psi_at..];
        self.ops.hamiltonian(top).mul_dense_acc(psi, rank, psi_out, minus_i);

        let mut scratch = Vec::new();
        for n in 0..top {
            let d = basis.sector_dim(n);
            let at = state.offsets[n];
            let rho = &state.data[at..at + d * d];
            let target = &mut lower_out[at..at + d * d];

            // −i(Hρ − (Hρ)†)
            scratch.clear();
            scratch.resize(d * d, zero);
            self.ops.hamiltonian(n).mul_dense_acc(rho, d, &mut scratch, C64::new(1.0, 0.0));
            for c in 0..d {
                for r in 0..d {
                    let v = scratch[r + c * d] - scratch[c + r * d].conj();
                    target[r + c * d] = minus_i * v;
                }
            }

            // feed from sector n + 1
            let lower = self.ops.lowering(n + 1);
            if n + 1 == top {
                let mut w = vec![zero; d * rank];
                lower.mul_dense_acc(psi, rank, &mut w, C64::new(1.0, 0.0));
                for c in 0..d {
                    for r in c..d {
                        let mut acc = zero;
                        for k in 0..rank {
                            acc += w[r + k * d] * w[c + k * d].conj();
                        }
                        target[r + c * d] += acc;
                        if r != c {
                            target[c + r * d] += acc.conj();
                        }
                    }
                }
            } else {
                let du = basis.sector_dim(n + 1);
                let au = state.offsets[n + 1];
                let rho_up = &state.data[au..au + du * du];
                let mut t = vec![zero; d * du];
                lower.mul_dense_acc(rho_up, du, &mut t, C64::new(1.0, 0.0));
                lower.dense_mul_adjoint_acc(&t, d, target, C64::new(1.0, 0.0));
            }
        }
    }
}
