//! Numerical tolerances shared across the crate.

/// Every threshold the library checks against, in one place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericalPolicy {
    /// Maximum |ρ_mn − conj(ρ_nm)| for a matrix to count as Hermitian.
    pub hermiticity: f64,
    /// Maximum |Tr ρ − 1| for a freshly constructed physical state.
    pub unit_trace: f64,
    /// Maximum coherence magnitude tolerated between excitation sectors.
    pub sector_coherence: f64,
    /// Most negative eigenvalue that may be clipped to zero.
    pub eigenvalue_clip: f64,
    /// Most negative eigenvalue an initial state may carry.
    pub initial_positivity: f64,
    /// Most negative snapshot eigenvalue a healthy trajectory may show.
    pub snapshot_positivity: f64,
    /// Values at or below this are treated as numerical noise by the fitters.
    pub fit_floor: f64,
}

pub const POLICY: NumericalPolicy = NumericalPolicy {
    hermiticity: 1e-10,
    unit_trace: 1e-12,
    sector_coherence: 1e-12,
    eigenvalue_clip: 1e-8,
    initial_positivity: 1e-10,
    snapshot_positivity: 1e-6,
    fit_floor: 1e-10,
};

impl Default for NumericalPolicy {
    fn default() -> Self {
        POLICY
    }
}
