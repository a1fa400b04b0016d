//! Battery energy versus lattice spacing.
//!
//! Every kd point reuses the same realization seeds, so the disordered
//! geometries differ between points only through the spacing.

use crate::ensemble::{run_realization, EnsembleConfig, EnsembleSummary, RealizationRecord};
use crate::exec::Execution;
use crate::model::{Arrangement, SystemSpec};
use crate::propagator::IntegratorConfig;
use crate::{Error, Result};

/// Both arrangements at one spacing, sampled at the checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub kd: f64,
    pub ordered: RealizationRecord,
    pub disordered: EnsembleSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpacingSweep {
    pub checkpoints: Vec<f64>,
    pub points: Vec<SweepPoint>,
}

/// Ordered and disorder-averaged energy per cell of `template` at each `kd`.
///
/// `n_avg` realizations are drawn from `master_seed` for every point. All
/// trajectories of the sweep are scheduled on `exec` as one batch.
pub fn spacing_sweep(
    template: &SystemSpec,
    kd_grid: &[f64],
    checkpoints: &[f64],
    n_avg: usize,
    master_seed: u64,
    integrator: &IntegratorConfig,
    exec: Execution,
) -> Result<SpacingSweep> {
    if kd_grid.is_empty() {
        return Err(Error::InvalidEnsemble("empty kd grid".into()));
    }
    let configs = kd_grid
        .iter()
        .map(|&kd| {
            let spec = template.with_kd(kd)?.with_arrangement(Arrangement::Disordered);
            let mut cfg = EnsembleConfig::new(spec, n_avg, master_seed, checkpoints.to_vec());
            cfg.integrator = *integrator;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    // item k·(n_avg + 1) is the ordered run of point k, the rest its realizations
    let per_point = n_avg + 1;
    let records = exec.map(configs.len() * per_point, |item| {
        let cfg = &configs[item / per_point];
        match item % per_point {
            0 => {
                let mut ordered = cfg.clone();
                ordered.spec = cfg.spec.with_arrangement(Arrangement::Ordered);
                run_realization(&ordered, 0)
            }
            r => run_realization(cfg, r - 1),
        }
    });
    let mut records = records.into_iter();
    let mut points = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let ordered = records.next().expect("one ordered record per point")?;
        let realizations = records.by_ref().take(n_avg).collect::<Result<Vec<_>>>()?;
        let disordered = EnsembleSummary::from_records(
            cfg.spec,
            master_seed,
            cfg.sample_times.clone(),
            cfg.integrator,
            realizations,
        )?;
        points.push(SweepPoint {
            kd: cfg.spec.kd(),
            ordered,
            disordered,
        });
    }
    Ok(SpacingSweep {
        checkpoints: checkpoints.to_vec(),
        points,
    })
}
