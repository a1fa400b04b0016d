//! The experiments: trajectories in, CSV tables out.
//!
//! File names carry the arrangement and the atom count, e.g.
//! `decay_disordered_L9.csv`. All energies are per cell, i.e. divided by the
//! input energy M·ω₀ of the battery, except the per-site tables.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use qbattery::analysis::{fit_exponential_tail, fit_power_law, spacing_sweep, FitResult};
use qbattery::ensemble::{run_ensemble, EnsembleConfig, EnsembleSummary, SeriesStats};
use qbattery::model::{Arrangement, SystemSpec};
use qbattery::observables::{single_atom_energy, single_atom_ergotropy, single_atom_rate};
use qbattery::policy::POLICY;
use qbattery::propagator::IntegratorConfig;
use qbattery::Execution;

use crate::config::{
    spec, DecayCurveConfig, Experiment, FitRatesConfig, LocalEnergyConfig, RunConfig, SpacingSweepConfig,
};
use crate::manifest::{Health, Phase};
use crate::output::{fmt_f64, OutputSet, Table};
use crate::CliError;

/// Runs experiments, sharing ensembles whose parameters coincide.
pub struct Runner {
    exec: Execution,
    seed: u64,
    n_avg: usize,
    cache: HashMap<String, Arc<EnsembleSummary>>,
    health: Health,
    phases: Vec<Phase>,
}

impl Runner {
    pub fn new(config: &RunConfig, exec: Execution) -> Self {
        Self {
            exec,
            seed: config.run.seed,
            n_avg: config.run.n_avg,
            cache: HashMap::new(),
            health: Health::default(),
            phases: Vec::new(),
        }
    }

    pub fn health(&self) -> Health {
        self.health
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn run_all(&mut self, config: &RunConfig, out: &mut OutputSet) -> Result<(), CliError> {
        for &experiment in &config.run.experiments {
            let started = Instant::now();
            match experiment {
                Experiment::DecayCurve => self.decay_curve(&config.decay_curve, out)?,
                Experiment::FitRates => self.fit_rates(&config.fit_rates, out)?,
                Experiment::LocalEnergy => self.local_energy(&config.local_energy, out)?,
                Experiment::SpacingSweep => self.spacing_sweep(&config.spacing_sweep, out)?,
            }
            self.phases.push(Phase {
                name: experiment.name().to_string(),
                seconds: started.elapsed().as_secs_f64(),
            });
        }
        Ok(())
    }

    fn check_health(&mut self, drift: f64, min_eig: f64, integrator: &IntegratorConfig, what: &str) -> Result<(), CliError> {
        self.health.absorb(drift, min_eig);
        if drift > integrator.trace_drift_bound() {
            return Err(CliError::Health(format!(
                "{what}: trace drift {drift:e} exceeds {:e}",
                integrator.trace_drift_bound()
            )));
        }
        if min_eig < -POLICY.snapshot_positivity {
            return Err(CliError::Health(format!("{what}: snapshot eigenvalue {min_eig:e}")));
        }
        Ok(())
    }

    fn ensemble(
        &mut self,
        spec: SystemSpec,
        times: &[f64],
        integrator: IntegratorConfig,
    ) -> Result<Arc<EnsembleSummary>, CliError> {
        let n_avg = match spec.arrangement() {
            Arrangement::Ordered => 1,
            Arrangement::Disordered => self.n_avg,
        };
        let mut cfg = EnsembleConfig::new(spec, n_avg, self.seed, times.to_vec());
        cfg.integrator = integrator;
        let key = format!("{cfg:?}");
        if let Some(hit) = self.cache.get(&key) {
            return Ok(Arc::clone(hit));
        }
        let summary = Arc::new(run_ensemble(&cfg, self.exec)?);
        let what = format!("{} L={}", spec.arrangement().name(), spec.n_atoms());
        self.check_health(summary.max_trace_drift, summary.min_eigenvalue, &integrator, &what)?;
        self.cache.insert(key, Arc::clone(&summary));
        Ok(summary)
    }

    fn decay_curve(&mut self, cfg: &DecayCurveConfig, out: &mut OutputSet) -> Result<(), CliError> {
        let times = cfg.times.build()?;
        let integrator = cfg.integrator.resolve();
        let rate = single_atom_rate(cfg.kd_over_pi * PI);
        let mut single = Table::new(&["tau", "energy", "ergotropy"]);
        for &t in &times {
            single.push(vec![
                fmt_f64(t),
                fmt_f64(single_atom_energy(t, rate)),
                fmt_f64(single_atom_ergotropy(t, rate)),
            ]);
        }
        out.write_table("decay_single_atom.csv", &single)?;

        let mut by_size = Table::new(&[
            "arrangement",
            "n_atoms",
            "tau",
            "energy_per_cell",
            "energy_stderr",
            "ergotropy_per_cell",
            "ergotropy_stderr",
        ]);
        for &arrangement in &cfg.arrangements {
            for &l in &cfg.sizes {
                let spec = spec(l, cfg.battery_size, cfg.kd_over_pi, arrangement.into())?;
                let s = self.ensemble(spec, &times, integrator)?;
                let mut table = Table::new(&[
                    "tau",
                    "energy_per_cell",
                    "energy_stderr",
                    "ergotropy_per_cell",
                    "ergotropy_stderr",
                    "trace_drift",
                ]);
                for (i, &t) in times.iter().enumerate() {
                    let drift = s.records.iter().map(|r| r.trace_drift[i]).fold(0.0, f64::max);
                    table.push(vec![
                        fmt_f64(t),
                        fmt_f64(s.energy_per_cell.mean[i]),
                        fmt_f64(s.energy_per_cell.stderr[i]),
                        fmt_f64(s.ergotropy_per_cell.mean[i]),
                        fmt_f64(s.ergotropy_per_cell.stderr[i]),
                        fmt_f64(drift),
                    ]);
                }
                let name = spec.arrangement().name();
                out.write_table(&format!("decay_{name}_L{l}.csv"), &table)?;
                for &c in &cfg.checkpoints {
                    let i = times.iter().position(|&t| t == c).expect("validated checkpoint");
                    by_size.push(vec![
                        name.to_string(),
                        l.to_string(),
                        fmt_f64(c),
                        fmt_f64(s.energy_per_cell.mean[i]),
                        fmt_f64(s.energy_per_cell.stderr[i]),
                        fmt_f64(s.ergotropy_per_cell.mean[i]),
                        fmt_f64(s.ergotropy_per_cell.stderr[i]),
                    ]);
                }
            }
        }
        if !by_size.is_empty() {
            out.write_table("energy_vs_size.csv", &by_size)?;
        }
        Ok(())
    }

    fn fit_rates(&mut self, cfg: &FitRatesConfig, out: &mut OutputSet) -> Result<(), CliError> {
        let times = cfg.times.build()?;
        let integrator = cfg.integrator.resolve();
        let mut curves = Vec::with_capacity(cfg.sizes.len());
        for &l in &cfg.sizes {
            let spec = spec(l, cfg.battery_size, cfg.kd_over_pi, Arrangement::Ordered)?;
            let s = self.ensemble(spec, &times, integrator)?;
            let mut table = Table::new(&["tau", "energy_per_cell", "ergotropy_per_cell"]);
            for (i, &t) in times.iter().enumerate() {
                table.push(vec![
                    fmt_f64(t),
                    fmt_f64(s.energy_per_cell.mean[i]),
                    fmt_f64(s.ergotropy_per_cell.mean[i]),
                ]);
            }
            out.write_table(&format!("fit_curve_L{l}.csv"), &table)?;
            curves.push(RateCurve {
                n_atoms: l,
                times: times.clone(),
                energy: s.energy_per_cell.mean.clone(),
                ergotropy: s.ergotropy_per_cell.mean.clone(),
            });
        }
        let tables = rate_tables(&curves)?;
        out.write_table("rates.csv", &tables.rates)?;
        out.write_table("rate_scaling.csv", &tables.scaling)?;
        Ok(())
    }

    fn local_energy(&mut self, cfg: &LocalEnergyConfig, out: &mut OutputSet) -> Result<(), CliError> {
        let times = cfg.times.build()?;
        let integrator = cfg.integrator.resolve();
        for &arrangement in &cfg.arrangements {
            for &l in &cfg.sizes {
                let spec = spec(l, cfg.battery_size, cfg.kd_over_pi, arrangement.into())?;
                let s = self.ensemble(spec, &times, integrator)?;
                let mut long = Table::new(&["tau", "site", "mean_energy", "stderr"]);
                for (i, &t) in times.iter().enumerate() {
                    for (j, site) in s.site_energies.iter().enumerate() {
                        long.push(vec![
                            fmt_f64(t),
                            (j + 1).to_string(),
                            fmt_f64(site.mean[i]),
                            fmt_f64(site.stderr[i]),
                        ]);
                    }
                }
                let name = spec.arrangement().name();
                out.write_table(&format!("local_energy_{name}_L{l}.csv"), &long)?;

                // the charged sites together, with the error bar of the sum
                let m = cfg.battery_size;
                let sums: Vec<Vec<f64>> = s
                    .records
                    .iter()
                    .map(|r| (0..times.len()).map(|i| r.site_energies[..m].iter().map(|e| e[i]).sum()).collect())
                    .collect();
                let stats = SeriesStats::from_series(&sums);
                let mut charged = Table::new(&["tau", "summed_energy", "stderr"]);
                for (i, &t) in times.iter().enumerate() {
                    charged.push(vec![fmt_f64(t), fmt_f64(stats.mean[i]), fmt_f64(stats.stderr[i])]);
                }
                out.write_table(&format!("local_energy_{name}_L{l}_charged.csv"), &charged)?;
            }
        }
        Ok(())
    }

    fn spacing_sweep(&mut self, cfg: &SpacingSweepConfig, out: &mut OutputSet) -> Result<(), CliError> {
        let template = spec(cfg.n_atoms, cfg.battery_size, cfg.kd_over_pi[0], Arrangement::Disordered)?;
        let kd: Vec<f64> = cfg.kd_over_pi.iter().map(|q| q * PI).collect();
        let integrator = cfg.integrator.resolve();
        let sweep = spacing_sweep(&template, &kd, &cfg.checkpoints, self.n_avg, self.seed, &integrator, self.exec)?;
        let mut table = Table::new(&[
            "kd_over_pi",
            "tau",
            "ordered_energy_per_cell",
            "disordered_energy_per_cell",
            "disordered_stderr",
        ]);
        for (point, &q) in sweep.points.iter().zip(&cfg.kd_over_pi) {
            let what = format!("sweep kd/pi={q}");
            self.check_health(point.ordered.max_trace_drift, point.ordered.min_eigenvalue, &integrator, &what)?;
            let d = &point.disordered;
            self.check_health(d.max_trace_drift, d.min_eigenvalue, &integrator, &what)?;
            for (i, &t) in sweep.checkpoints.iter().enumerate() {
                table.push(vec![
                    fmt_f64(q),
                    fmt_f64(t),
                    fmt_f64(point.ordered.energy_per_cell[i]),
                    fmt_f64(d.energy_per_cell.mean[i]),
                    fmt_f64(d.energy_per_cell.stderr[i]),
                ]);
            }
        }
        out.write_table("spacing_sweep.csv", &table)?;
        Ok(())
    }
}

/// Battery observables of one size, per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub n_atoms: usize,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub ergotropy: Vec<f64>,
}

pub struct RateTables {
    pub energy_fits: Vec<FitResult>,
    pub ergotropy_fits: Vec<FitResult>,
    pub energy_scaling: FitResult,
    pub ergotropy_scaling: FitResult,
    pub rates: Table,
    pub scaling: Table,
}

/// Tail rates of every curve on the default window and their power laws in L.
pub fn rate_tables(curves: &[RateCurve]) -> Result<RateTables, CliError> {
    let mut energy_fits = Vec::with_capacity(curves.len());
    let mut ergotropy_fits = Vec::with_capacity(curves.len());
    let mut rates = Table::new(&[
        "n_atoms",
        "energy_rate",
        "energy_window_start",
        "energy_window_end",
        "energy_r_squared",
        "ergotropy_rate",
        "ergotropy_window_start",
        "ergotropy_window_end",
        "ergotropy_r_squared",
    ]);
    for c in curves {
        let e = fit_exponential_tail(&c.times, &c.energy, None)?;
        let x = fit_exponential_tail(&c.times, &c.ergotropy, None)?;
        rates.push(vec![
            c.n_atoms.to_string(),
            fmt_f64(e.rate()),
            fmt_f64(e.window.start),
            fmt_f64(e.window.end),
            fmt_f64(e.r_squared),
            fmt_f64(x.rate()),
            fmt_f64(x.window.start),
            fmt_f64(x.window.end),
            fmt_f64(x.r_squared),
        ]);
        energy_fits.push(e);
        ergotropy_fits.push(x);
    }
    let sizes: Vec<f64> = curves.iter().map(|c| c.n_atoms as f64).collect();
    let energy_rates: Vec<f64> = energy_fits.iter().map(FitResult::rate).collect();
    let ergotropy_rates: Vec<f64> = ergotropy_fits.iter().map(FitResult::rate).collect();
    let energy_scaling = fit_power_law(&sizes, &energy_rates)?;
    let ergotropy_scaling = fit_power_law(&sizes, &ergotropy_rates)?;
    let mut scaling = Table::new(&["quantity", "exponent", "prefactor", "r_squared", "n_points"]);
    for (name, fit) in [("energy", &energy_scaling), ("ergotropy", &ergotropy_scaling)] {
        scaling.push(vec![
            name.to_string(),
            fmt_f64(fit.exponent()),
            fmt_f64(fit.prefactor()),
            fmt_f64(fit.r_squared),
            fit.n_points.to_string(),
        ]);
    }
    Ok(RateTables {
        energy_fits,
        ergotropy_fits,
        energy_scaling,
        ergotropy_scaling,
        rates,
        scaling,
    })
}
