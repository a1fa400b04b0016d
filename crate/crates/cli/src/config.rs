//! Run configuration: one TOML document with a section per experiment.
//!
//! Every field has a default, so an empty file is a valid configuration that
//! reproduces the standard parameter set (M = 3, kd = 2.7π). Spacings are
//! given as kd/π so that Bragg points are written exactly.

use std::f64::consts::PI;
use std::path::Path;

use qbattery::model::{Arrangement, SystemSpec};
use qbattery::propagator::{log_time_grid, IntegratorConfig, IntegratorMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    DecayCurve,
    FitRates,
    LocalEnergy,
    SpacingSweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::DecayCurve => "decay_curve",
            Experiment::FitRates => "fit_rates",
            Experiment::LocalEnergy => "local_energy",
            Experiment::SpacingSweep => "spacing_sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrangementName {
    Ordered,
    Disordered,
}

impl From<ArrangementName> for Arrangement {
    fn from(a: ArrangementName) -> Self {
        match a {
            ArrangementName::Ordered => Arrangement::Ordered,
            ArrangementName::Disordered => Arrangement::Disordered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    Adaptive,
    FixedRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub mode: IntegratorKind,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Fixed-RK4 step.
    pub step: f64,
    pub max_step: f64,
    pub safety: f64,
}

impl IntegratorSection {
    fn adaptive(abs_tol: f64, rel_tol: f64) -> Self {
        let base = IntegratorConfig::default();
        Self {
            mode: IntegratorKind::Adaptive,
            abs_tol,
            rel_tol,
            step: 0.01,
            max_step: base.max_step,
            safety: base.safety,
        }
    }

    pub fn resolve(&self) -> IntegratorConfig {
        IntegratorConfig {
            mode: match self.mode {
                IntegratorKind::Adaptive => IntegratorMode::Adaptive,
                IntegratorKind::FixedRk4 => IntegratorMode::FixedRk4,
            },
            step: self.step,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_step: self.max_step,
            safety: self.safety,
            ..IntegratorConfig::default()
        }
    }
}

impl Default for IntegratorSection {
    /// Reduced states near the eigenvalue clip need an absolute tolerance
    /// below the library default.
    fn default() -> Self {
        Self::adaptive(1e-10, 1e-8)
    }
}

/// Optional τ = 0 followed by log-spaced times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub points_per_decade: usize,
    pub include_zero: bool,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            start: 1e-2,
            end: 1e3,
            points_per_decade: 40,
            include_zero: true,
        }
    }
}

impl TimeGrid {
    pub fn build(&self) -> Result<Vec<f64>, CliError> {
        if !(self.start > 0.0 && self.end > self.start && self.end.is_finite()) || self.points_per_decade == 0 {
            return Err(CliError::Config(format!(
                "invalid time grid [{}, {}] with {} points per decade",
                self.start, self.end, self.points_per_decade
            )));
        }
        let decades = (self.end / self.start).log10();
        let n = (decades * self.points_per_decade as f64).round().max(1.0) as usize + 1;
        let mut times = Vec::with_capacity(n + 1);
        if self.include_zero {
            times.push(0.0);
        }
        times.extend(log_time_grid(self.start, self.end, n));
        Ok(times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Realizations per disordered ensemble; ordered runs use one.
    pub n_avg: usize,
    /// Experiments executed by `run`, sharing ensembles where parameters coincide.
    pub experiments: Vec<Experiment>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 2025,
            n_avg: 200,
            experiments: vec![Experiment::DecayCurve],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayCurveConfig {
    pub battery_size: usize,
    pub kd_over_pi: f64,
    pub sizes: Vec<usize>,
    pub arrangements: Vec<ArrangementName>,
    /// Times tabulated in `energy_vs_size.csv`; must lie on the grid.
    pub checkpoints: Vec<f64>,
    pub times: TimeGrid,
    pub integrator: IntegratorSection,
}

impl Default for DecayCurveConfig {
    fn default() -> Self {
        Self {
            battery_size: 3,
            kd_over_pi: 2.7,
            sizes: (3..=9).collect(),
            arrangements: vec![ArrangementName::Ordered, ArrangementName::Disordered],
            checkpoints: vec![10.0, 100.0],
            times: TimeGrid::default(),
            integrator: IntegratorSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitRatesConfig {
    pub battery_size: usize,
    pub kd_over_pi: f64,
    pub sizes: Vec<usize>,
    pub times: TimeGrid,
    pub integrator: IntegratorSection,
}

impl Default for FitRatesConfig {
    /// The subradiant tail of L = 9 is only reached after τ ≈ 10³, and the
    /// fit follows it down to 10⁻¹⁰, hence the long horizon and tight tolerances.
    fn default() -> Self {
        Self {
            battery_size: 3,
            kd_over_pi: 2.7,
            sizes: (4..=9).collect(),
            times: TimeGrid {
                end: 1e4,
                include_zero: false,
                ..TimeGrid::default()
            },
            integrator: IntegratorSection::adaptive(1e-14, 1e-10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalEnergyConfig {
    pub battery_size: usize,
    pub kd_over_pi: f64,
    pub sizes: Vec<usize>,
    pub arrangements: Vec<ArrangementName>,
    pub times: TimeGrid,
    pub integrator: IntegratorSection,
}

impl Default for LocalEnergyConfig {
    fn default() -> Self {
        Self {
            battery_size: 3,
            kd_over_pi: 2.7,
            sizes: vec![9],
            arrangements: vec![ArrangementName::Ordered, ArrangementName::Disordered],
            times: TimeGrid::default(),
            integrator: IntegratorSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpacingSweepConfig {
    pub n_atoms: usize,
    pub battery_size: usize,
    pub kd_over_pi: Vec<f64>,
    pub checkpoints: Vec<f64>,
    pub integrator: IntegratorSection,
}

impl Default for SpacingSweepConfig {
    fn default() -> Self {
        Self {
            n_atoms: 8,
            battery_size: 3,
            kd_over_pi: (0..=20).map(|i| 2.0 + 0.05 * i as f64).collect(),
            checkpoints: vec![10.0, 100.0, 1000.0],
            integrator: IntegratorSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub decay_curve: DecayCurveConfig,
    pub fit_rates: FitRatesConfig,
    pub local_energy: LocalEnergyConfig,
    pub spacing_sweep: SpacingSweepConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    /// Sets every experiment's tolerances, absolute and relative, to `tol`.
    pub fn set_tolerance(&mut self, tol: f64) {
        for section in [
            &mut self.decay_curve.integrator,
            &mut self.fit_rates.integrator,
            &mut self.local_energy.integrator,
            &mut self.spacing_sweep.integrator,
        ] {
            section.abs_tol = tol;
            section.rel_tol = tol;
        }
    }

    /// Rejects anything that would fail later, before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.run.n_avg == 0 {
            return Err(CliError::Config("n_avg must be at least 1".into()));
        }
        if self.run.experiments.is_empty() {
            return Err(CliError::Config("no experiments selected".into()));
        }
        for exp in &self.run.experiments {
            match exp {
                Experiment::DecayCurve => {
                    let c = &self.decay_curve;
                    check_sizes(c.battery_size, c.kd_over_pi, &c.sizes, "decay_curve")?;
                    check_nonempty(&c.arrangements, "decay_curve.arrangements")?;
                    check_integrator(&c.integrator)?;
                    let grid = c.times.build()?;
                    if let Some(t) = c.checkpoints.iter().find(|t| !grid.contains(t)) {
                        return Err(CliError::Config(format!("decay_curve checkpoint {t} is not on the time grid")));
                    }
                }
                Experiment::FitRates => {
                    let c = &self.fit_rates;
                    check_sizes(c.battery_size, c.kd_over_pi, &c.sizes, "fit_rates")?;
                    check_integrator(&c.integrator)?;
                    c.times.build()?;
                    if c.sizes.len() < 3 {
                        return Err(CliError::Config("fit_rates needs at least three sizes".into()));
                    }
                }
                Experiment::LocalEnergy => {
                    let c = &self.local_energy;
                    check_sizes(c.battery_size, c.kd_over_pi, &c.sizes, "local_energy")?;
                    check_nonempty(&c.arrangements, "local_energy.arrangements")?;
                    check_integrator(&c.integrator)?;
                    c.times.build()?;
                }
                Experiment::SpacingSweep => {
                    let c = &self.spacing_sweep;
                    check_nonempty(&c.kd_over_pi, "spacing_sweep.kd_over_pi")?;
                    for &q in &c.kd_over_pi {
                        spec(c.n_atoms, c.battery_size, q, Arrangement::Ordered)?;
                    }
                    check_nonempty(&c.checkpoints, "spacing_sweep.checkpoints")?;
                    if c.checkpoints.windows(2).any(|w| w[1] <= w[0]) || c.checkpoints[0] < 0.0 {
                        return Err(CliError::Config("spacing_sweep.checkpoints must increase from τ ≥ 0".into()));
                    }
                    check_integrator(&c.integrator)?;
                }
            }
        }
        Ok(())
    }
}

pub fn spec(n_atoms: usize, battery_size: usize, kd_over_pi: f64, arrangement: Arrangement) -> Result<SystemSpec, CliError> {
    SystemSpec::new(n_atoms, battery_size, kd_over_pi * PI, arrangement).map_err(|e| CliError::Config(e.to_string()))
}

fn check_sizes(m: usize, kd_over_pi: f64, sizes: &[usize], section: &str) -> Result<(), CliError> {
    check_nonempty(sizes, &format!("{section}.sizes"))?;
    for &l in sizes {
        spec(l, m, kd_over_pi, Arrangement::Ordered).map_err(|e| CliError::Config(format!("{section}: {e}")))?;
    }
    Ok(())
}

fn check_nonempty<T>(items: &[T], what: &str) -> Result<(), CliError> {
    if items.is_empty() {
        return Err(CliError::Config(format!("{what} is empty")));
    }
    Ok(())
}

fn check_integrator(section: &IntegratorSection) -> Result<(), CliError> {
    section.resolve().validate().map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.run.seed = u64::MAX;
        cfg.run.experiments = vec![Experiment::FitRates, Experiment::SpacingSweep];
        cfg.decay_curve.kd_over_pi = 0.1 + 0.2;
        cfg.spacing_sweep.integrator.mode = IntegratorKind::FixedRk4;
        let text = cfg.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[run]\nseeds = 3\n").is_err());
        assert!(RunConfig::from_toml("[decay_curve]\narrangements = [\"crystal\"]\n").is_err());
    }

    #[test]
    fn default_grids_hit_powers_of_ten() {
        let grid = TimeGrid::default().build().unwrap();
        assert_eq!(grid.len(), 202);
        for t in [0.0, 0.01, 1.0, 10.0, 100.0, 1000.0] {
            assert!(grid.contains(&t));
        }
        assert_eq!(FitRatesConfig::default().times.build().unwrap().len(), 241);
    }

    #[test]
    fn validation_catches_bad_parameters() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.decay_curve.sizes = vec![2];
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let mut cfg = RunConfig::default();
        cfg.decay_curve.checkpoints = vec![50.0];
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.run.n_avg = 0;
        assert!(cfg.validate().is_err());
    }
}
