//! Decay-rate extraction and parameter sweeps.

mod fits;
mod sweep;

pub use fits::{
    default_tail_window, fit_exponential_tail, fit_power_law, subexponential_discriminator, FitModel, FitResult,
    FitWindow,
};
pub use sweep::{spacing_sweep, SpacingSweep, SweepPoint};
