//! Time integration of dρ/dt = 𝓛(ρ).
//!
//! The default is an embedded Dormand-Prince 5(4) pair with step-size
//! control; classical fixed-step RK4 is available as a mode. Steps are clipped
//! so that every requested sample time is hit exactly. After each accepted
//! step the state is symmetrized, ρ ← (ρ + ρ†)/2; the trace is never
//! renormalized, drift is recorded per sample instead.

mod full;
mod oracle;
mod rk;
mod sector_flow;

pub use full::FullSpaceFlow;
pub use oracle::{exact_evolve_small, superoperator, ORACLE_MAX_SITES};
pub use sector_flow::{SectorFlow, SectorState};

use crate::policy::POLICY;
use crate::{C64, Error, Result};

/// Flat complex storage the steppers operate on.
pub trait OdeState: Clone + Send {
    fn data(&self) -> &[C64];
    fn data_mut(&mut self) -> &mut [C64];
    /// ρ ← (ρ + ρ†)/2
    fn hermitize(&mut self);
    fn hermiticity_error(&self) -> f64;
    fn trace(&self) -> C64;
    fn min_eigenvalue(&self) -> Result<f64>;
}

/// A right-hand side dρ/dt = 𝓛(ρ) over some state representation.
pub trait Flow: Sync {
    type State: OdeState;

    /// Writes 𝓛(state) into `out`, overwriting its contents.
    fn rhs(&self, state: &Self::State, out: &mut Self::State);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegratorMode {
    /// Classical RK4 with a fixed step.
    FixedRk4,
    /// Dormand-Prince 5(4) with PI step-size control.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub mode: IntegratorMode,
    /// Step for [`IntegratorMode::FixedRk4`].
    pub step: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub safety: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            mode: IntegratorMode::Adaptive,
            step: 0.01,
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            max_step: f64::INFINITY,
            safety: 0.9,
            max_steps: 100_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn fixed_rk4(step: f64) -> Self {
        Self {
            mode: IntegratorMode::FixedRk4,
            step,
            ..Self::default()
        }
    }

    pub fn adaptive(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidIntegrator(msg.to_string()));
        match self.mode {
            IntegratorMode::FixedRk4 => {
                if !(self.step.is_finite() && self.step > 0.0) {
                    return bad("fixed step must be finite and positive");
                }
            }
            IntegratorMode::Adaptive => {
                if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
                    return bad("tolerances must be positive");
                }
                if self.rel_tol < 100.0 * f64::EPSILON {
                    return bad("relative tolerance unreachable in double precision");
                }
                if self.max_step.is_nan() || self.max_step <= 0.0 {
                    return bad("max step must be positive");
                }
                if !(self.safety > 0.0 && self.safety < 1.0) {
                    return bad("safety factor must lie in (0, 1)");
                }
            }
        }
        if self.max_steps == 0 {
            return bad("step budget must be positive");
        }
        Ok(())
    }

    /// Tolerated |Tr ρ(t) − Tr ρ(0)| at any sample.
    pub fn trace_drift_bound(&self) -> f64 {
        match self.mode {
            IntegratorMode::Adaptive => 100.0 * self.rel_tol,
            // RK4 preserves linear invariants exactly up to rounding
            IntegratorMode::FixedRk4 => 1e-10,
        }
    }
}

/// Integrator health recorded at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleHealth {
    /// |Tr ρ(t) − Tr ρ(0)|
    pub trace_drift: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
}

/// Snapshots on the requested time grid.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub sample_times: Vec<f64>,
    pub states: Vec<S>,
    pub health: Vec<SampleHealth>,
    pub stats: IntegrationStats,
}

impl<S> Trajectory<S> {
    pub fn max_trace_drift(&self) -> f64 {
        self.health.iter().map(|h| h.trace_drift).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.health
            .iter()
            .map(|h| h.min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

/// `n` logarithmically spaced times from `start` to `end`, endpoints exact.
pub fn log_time_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    assert!(start > 0.0 && end > start && n >= 2, "invalid log grid");
    let (a, b) = (start.log10(), end.log10());
    (0..n)
        .map(|i| match i {
            0 => start,
            i if i == n - 1 => end,
            i => 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64),
        })
        .collect()
}

/// The default experiment grid: τ = 0, then 40 log-spaced times per decade
/// over [10⁻², 10³], so every integer power of ten is sampled exactly.
pub fn default_time_grid() -> Vec<f64> {
    std::iter::once(0.0).chain(log_time_grid(1e-2, 1e3, 201)).collect()
}

pub(crate) fn validate_sample_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidSampleTimes("no sample times".into()));
    }
    if !times.iter().all(|t| t.is_finite()) {
        return Err(Error::InvalidSampleTimes("non-finite sample time".into()));
    }
    if times[0] < 0.0 {
        return Err(Error::InvalidSampleTimes("first sample time is negative".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSampleTimes("sample times must strictly increase".into()));
    }
    Ok(())
}

fn validate_initial<S: OdeState>(rho0: &S) -> Result<()> {
    let herm = rho0.hermiticity_error();
    if herm > POLICY.hermiticity {
        return Err(Error::InvalidInitialState(format!("not Hermitian ({herm:e})")));
    }
    let tr = rho0.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > POLICY.unit_trace {
        return Err(Error::InvalidInitialState(format!("trace {tr} is not 1")));
    }
    let min = rho0.min_eigenvalue()?;
    if min < -POLICY.initial_positivity {
        return Err(Error::InvalidInitialState(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// Propagates `rho0` and stores a snapshot at every sample time.
pub fn evolve<F: Flow>(
    flow: &F,
    rho0: &F::State,
    sample_times: &[f64],
    config: &IntegratorConfig,
) -> Result<Trajectory<F::State>> {
    let mut states = Vec::with_capacity(sample_times.len());
    let (health, stats) = evolve_with(flow, rho0, sample_times, config, |_, _, s| {
        states.push(s.clone());
        Ok(())
    })?;
    Ok(Trajectory {
        sample_times: sample_times.to_vec(),
        states,
        health,
        stats,
    })
}

/// Lean propagation: `observer(index, time, state)` runs at every sample and
/// nothing else is retained.
pub fn evolve_with<F, O>(
    flow: &F,
    rho0: &F::State,
    sample_times: &[f64],
    config: &IntegratorConfig,
    mut observer: O,
) -> Result<(Vec<SampleHealth>, IntegrationStats)>
where
    F: Flow,
    O: FnMut(usize, f64, &F::State) -> Result<()>,
{
    config.validate()?;
    validate_sample_times(sample_times)?;
    validate_initial(rho0)?;
    let trace0 = rho0.trace();
    let mut stepper = rk::Stepper::new(flow, rho0.clone(), *config);
    let mut health = Vec::with_capacity(sample_times.len());
    for (i, &t) in sample_times.iter().enumerate() {
        stepper.advance_to(t)?;
        let state = stepper.state();
        health.push(SampleHealth {
            trace_drift: (state.trace() - trace0).norm(),
            min_eigenvalue: state.min_eigenvalue()?,
        });
        observer(i, t, state)?;
    }
    Ok((health, stepper.stats()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_endpoints_exact() {
        let g = default_time_grid();
        assert_eq!(g.len(), 202);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[201], 1e3);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        for p in [1e-2, 1e-1, 1.0, 10.0, 100.0] {
            assert!(g.contains(&p), "{p} missing");
        }
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        assert!(IntegratorConfig::adaptive(0.0, 1e-8).validate().is_err());
        assert!(IntegratorConfig::adaptive(1e-8, 1e-17).validate().is_err());
        assert!(IntegratorConfig::fixed_rk4(-1.0).validate().is_err());
    }

    #[test]
    fn sample_time_validation() {
        assert!(validate_sample_times(&[0.0, 1.0]).is_ok());
        assert!(validate_sample_times(&[]).is_err());
        assert!(validate_sample_times(&[-1.0, 1.0]).is_err());
        assert!(validate_sample_times(&[1.0, 1.0]).is_err());
        assert!(validate_sample_times(&[2.0, 1.0]).is_err());
    }
}
