use super::{Flow, OdeState};
use crate::model::{FullSpaceOperators, LindbladGenerator};
use crate::qubit::DensityMatrix;
use crate::{C64, Result};

impl OdeState for DensityMatrix {
    fn data(&self) -> &[C64] {
        self.matrix().as_slice()
    }

    fn data_mut(&mut self) -> &mut [C64] {
        self.matrix_mut().as_mut_slice()
    }

    fn hermitize(&mut self) {
        DensityMatrix::hermitize(self)
    }

    fn hermiticity_error(&self) -> f64 {
        DensityMatrix::hermiticity_error(self)
    }

    fn trace(&self) -> C64 {
        DensityMatrix::trace(self)
    }

    fn min_eigenvalue(&self) -> Result<f64> {
        DensityMatrix::min_eigenvalue(self)
    }
}

/// Master equation on the full `2^L` space, via the collective jump operator.
#[derive(Debug, Clone)]
pub struct FullSpaceFlow {
    ops: FullSpaceOperators,
}

impl FullSpaceFlow {
    pub fn new(generator: &LindbladGenerator) -> Self {
        Self {
            ops: FullSpaceOperators::new(generator),
        }
    }
}

impl Flow for FullSpaceFlow {
    type State = DensityMatrix;

    fn rhs(&self, state: &DensityMatrix, out: &mut DensityMatrix) {
        self.ops.apply(state.matrix().as_slice(), out.matrix_mut().as_mut_slice());
    }
}

