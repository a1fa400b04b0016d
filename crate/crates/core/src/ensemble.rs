//! Disorder realizations and their aggregation.
//!
//! Realization `i` of an ensemble draws its offsets from its own seed,
//! `seed_i = splitmix64(master_seed + (i + 1)·0x9E3779B97F4A7C15)`, i.e. the
//! `i`-th output of a SplitMix64 stream started at `master_seed`. Each seed
//! initializes a ChaCha8 generator that yields `L` uniform offsets in
//! `[−1/2, 1/2]`. Realizations are independent, may run on any number of
//! workers and are reduced in index order with pairwise summation, so a
//! summary is bit-identical regardless of the worker count.
//!
//! Error bars are standard errors of the mean, sample standard deviation over
//! `√N`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::Execution;
use crate::model::{build_generator, build_geometry, Arrangement, Geometry, SystemSpec};
use crate::observables::read_battery;
use crate::propagator::{evolve_with, IntegrationStats, IntegratorConfig, SectorFlow, SectorState};
use crate::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of realization `index` under `master_seed`.
pub fn realization_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `L` independent uniform offsets in `[−1/2, 1/2]`, a pure function of `seed`.
pub fn sample_epsilons(spec: &SystemSpec, seed: u64) -> Result<Vec<f64>> {
    if spec.arrangement() != Arrangement::Disordered {
        return Err(Error::UnexpectedEpsilons);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..spec.n_atoms()).map(|_| rng.random_range(-0.5..=0.5)).collect())
}

/// Fixed-order pairwise sum.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Battery observables of one geometry on the sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRecord {
    pub index: usize,
    pub seed: u64,
    pub epsilons: Vec<f64>,
    pub energy_per_cell: Vec<f64>,
    pub ergotropy_per_cell: Vec<f64>,
    /// `site_energies[j − 1][t]`
    pub site_energies: Vec<Vec<f64>>,
    pub trace_drift: Vec<f64>,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
    pub stats: IntegrationStats,
}

/// Propagates the charged battery in `geometry` and records its observables.
pub fn simulate_geometry(
    spec: &SystemSpec,
    geometry: &Geometry,
    sample_times: &[f64],
    integrator: &IntegratorConfig,
) -> Result<RealizationRecord> {
    let generator = build_generator(geometry, spec)?;
    let m = spec.battery_size();
    let flow = SectorFlow::new(&generator, m)?;
    let rho0 = SectorState::charged(spec.n_atoms(), m)?;
    let n_t = sample_times.len();
    let mut energy = Vec::with_capacity(n_t);
    let mut ergotropy = Vec::with_capacity(n_t);
    let mut sites = vec![Vec::with_capacity(n_t); spec.n_atoms()];
    let (health, stats) = evolve_with(&flow, &rho0, sample_times, integrator, |_, _, state| {
        let reading = read_battery(&state.to_blocks(), m)?;
        energy.push(reading.energy / m as f64);
        ergotropy.push(reading.ergotropy / m as f64);
        for (series, e) in sites.iter_mut().zip(reading.site_energies) {
            series.push(e);
        }
        Ok(())
    })?;
    let trace_drift: Vec<f64> = health.iter().map(|h| h.trace_drift).collect();
    Ok(RealizationRecord {
        index: 0,
        seed: 0,
        epsilons: geometry.epsilons().to_vec(),
        energy_per_cell: energy,
        ergotropy_per_cell: ergotropy,
        site_energies: sites,
        max_trace_drift: trace_drift.iter().copied().fold(0.0, f64::max),
        trace_drift,
        min_eigenvalue: health.iter().map(|h| h.min_eigenvalue).fold(f64::INFINITY, f64::min),
        stats,
    })
}

/// One realization of `config`: ordered geometry, or offsets drawn from the seed.
pub fn run_realization(config: &EnsembleConfig, index: usize) -> Result<RealizationRecord> {
    let seed = realization_seed(config.master_seed, index as u64);
    let wrap = |e: Error| Error::Realization {
        index,
        seed,
        source: Box::new(e),
    };
    let geometry = match config.spec.arrangement() {
        Arrangement::Ordered => build_geometry(&config.spec, None),
        Arrangement::Disordered => {
            sample_epsilons(&config.spec, seed).and_then(|eps| build_geometry(&config.spec, Some(&eps)))
        }
    }
    .map_err(wrap)?;
    let mut record =
        simulate_geometry(&config.spec, &geometry, &config.sample_times, &config.integrator).map_err(wrap)?;
    record.index = index;
    record.seed = seed;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub spec: SystemSpec,
    pub n_avg: usize,
    pub master_seed: u64,
    /// Index of the first realization; disjoint ranges give mergeable summaries.
    pub first_index: usize,
    pub sample_times: Vec<f64>,
    pub integrator: IntegratorConfig,
}

impl EnsembleConfig {
    pub fn new(spec: SystemSpec, n_avg: usize, master_seed: u64, sample_times: Vec<f64>) -> Self {
        Self {
            spec,
            n_avg,
            master_seed,
            first_index: 0,
            sample_times,
            integrator: IntegratorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_avg == 0 {
            return Err(Error::InvalidEnsemble("at least one realization is required".into()));
        }
        self.integrator.validate()?;
        crate::propagator::validate_sample_times(&self.sample_times)
    }
}

/// Per-time mean and standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl SeriesStats {
    /// Per-time statistics of equally long series, reduced in the given order.
    pub fn from_series(series: &[Vec<f64>]) -> Self {
        let n_t = series.first().map_or(0, Vec::len);
        Self::from_rows(series.iter().map(Vec::as_slice), n_t)
    }

    /// Column statistics of `rows[r][t]`, reduced in row order.
    fn from_rows<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, n_t: usize) -> Self {
        let mut mean = Vec::with_capacity(n_t);
        let mut stderr = Vec::with_capacity(n_t);
        let mut column = Vec::new();
        for t in 0..n_t {
            column.clear();
            column.extend(rows.clone().map(|r| r[t]));
            let n = column.len() as f64;
            let mu = pairwise_sum(&column) / n;
            let se = if column.len() > 1 {
                let sq: Vec<f64> = column.iter().map(|x| (x - mu).powi(2)).collect();
                (pairwise_sum(&sq) / (n - 1.0)).sqrt() / n.sqrt()
            } else {
                0.0
            };
            mean.push(mu);
            stderr.push(se);
        }
        Self { mean, stderr }
    }
}

/// Disorder-averaged battery observables.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub spec: SystemSpec,
    pub master_seed: u64,
    pub sample_times: Vec<f64>,
    pub integrator: IntegratorConfig,
    pub energy_per_cell: SeriesStats,
    pub ergotropy_per_cell: SeriesStats,
    /// `site_energies[j − 1]`
    pub site_energies: Vec<SeriesStats>,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
    /// Every realization, ordered by index.
    pub records: Vec<RealizationRecord>,
}

impl EnsembleSummary {
    pub fn from_records(
        spec: SystemSpec,
        master_seed: u64,
        sample_times: Vec<f64>,
        integrator: IntegratorConfig,
        mut records: Vec<RealizationRecord>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidEnsemble("no realizations".into()));
        }
        records.sort_by_key(|r| r.index);
        if records.windows(2).any(|w| w[0].index == w[1].index) {
            return Err(Error::IncompatibleSummaries("duplicate realization index".into()));
        }
        let n_t = sample_times.len();
        let energy = SeriesStats::from_rows(records.iter().map(|r| r.energy_per_cell.as_slice()), n_t);
        let ergo = SeriesStats::from_rows(records.iter().map(|r| r.ergotropy_per_cell.as_slice()), n_t);
        let sites = (0..spec.n_atoms())
            .map(|j| SeriesStats::from_rows(records.iter().map(move |r| r.site_energies[j].as_slice()), n_t))
            .collect();
        Ok(Self {
            spec,
            master_seed,
            integrator,
            energy_per_cell: energy,
            ergotropy_per_cell: ergo,
            site_energies: sites,
            max_trace_drift: records.iter().map(|r| r.max_trace_drift).fold(0.0, f64::max),
            min_eigenvalue: records.iter().map(|r| r.min_eigenvalue).fold(f64::INFINITY, f64::min),
            sample_times,
            records,
        })
    }

    pub fn realization_count(&self) -> usize {
        self.records.len()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.seed).collect()
    }

    /// Summary over the union of two disjoint realization sets.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.spec != other.spec
            || self.master_seed != other.master_seed
            || self.sample_times != other.sample_times
            || self.integrator != other.integrator
        {
            return Err(Error::IncompatibleSummaries(
                "system, seed, time grid or integrator differ".into(),
            ));
        }
        let records = self.records.iter().chain(&other.records).cloned().collect();
        Self::from_records(self.spec, self.master_seed, self.sample_times.clone(), self.integrator, records)
    }
}

/// Runs `config.n_avg` realizations starting at `config.first_index`.
pub fn run_ensemble(config: &EnsembleConfig, exec: Execution) -> Result<EnsembleSummary> {
    config.validate()?;
    let outcomes = exec.map(config.n_avg, |i| run_realization(config, config.first_index + i));
    let records = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    EnsembleSummary::from_records(
        config.spec,
        config.master_seed,
        config.sample_times.clone(),
        config.integrator,
        records,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disordered(l: usize) -> SystemSpec {
        SystemSpec::new(l, 1.min(l), 2.7 * PI, Arrangement::Disordered).unwrap()
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        assert_eq!(realization_seed(7, 3), realization_seed(7, 3));
        assert_ne!(realization_seed(7, 3), realization_seed(7, 4));
        assert_ne!(realization_seed(7, 3), realization_seed(8, 3));
        let spec = disordered(5);
        assert_eq!(sample_epsilons(&spec, 11).unwrap(), sample_epsilons(&spec, 11).unwrap());
    }

    #[test]
    fn epsilon_moments() {
        // 10⁵ draws spread over 10⁴ seeds of 10 sites
        let spec = disordered(10);
        let draws: Vec<f64> = (0..10_000)
            .flat_map(|i| sample_epsilons(&spec, realization_seed(1234, i)).unwrap())
            .collect();
        assert_eq!(draws.len(), 100_000);
        assert!(draws.iter().all(|e| (-0.5..=0.5).contains(e)));
        let n = draws.len() as f64;
        let mean = pairwise_sum(&draws) / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.05 / 12.0, "variance {var}");
    }

    #[test]
    fn ordered_arrangement_has_no_offsets() {
        let spec = disordered(3).with_arrangement(Arrangement::Ordered);
        assert!(matches!(sample_epsilons(&spec, 1), Err(Error::UnexpectedEpsilons)));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_exact_values() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn empty_ensemble_is_rejected() {
        let cfg = EnsembleConfig::new(disordered(2), 0, 1, vec![0.0, 1.0]);
        assert!(matches!(run_ensemble(&cfg, Execution::Sequential), Err(Error::InvalidEnsemble(_))));
    }
}
