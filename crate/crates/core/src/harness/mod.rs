//! Seeded Monte Carlo experiments over either model, aggregated against the
//! water-filling benchmarks.
//!
//! Replication `r` draws everything from `derive_seed(base_seed, r)`, so any
//! replication can be rerun in isolation, and the records come back in
//! replication order whether they were computed serially or on a thread pool.

mod config;
mod output;

pub use config::{ExperimentConfig, OutputPaths, Setting};
pub use output::{
    read_records_csv, write_outputs, write_partial_records, write_records_csv, write_summary_csv,
    write_summary_json,
    RECORD_COLUMNS,
};

use serde::{Deserialize, Serialize};

use crate::benchmarks;
use crate::error::{Error, Result};
use crate::functions::{ConvexFunction, ExtremumTruth, FunctionSpec};
use crate::noise::{derive_seed, stream};
use crate::regression::{self, RegressionSample, SplitSample};
use crate::stats::Probability;
use crate::whitenoise::{self, PathStore};
use crate::{Model, ProcedureResult};

/// How replications are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Serial,
    /// Rayon pool with the given number of threads, or the global pool.
    /// Without the `parallel` feature this runs serially.
    #[default]
    Parallel,
    ParallelWith(usize),
}

/// A validated experiment ready to run.
#[derive(Clone, Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    function: ConvexFunction,
    setting: Setting,
    noiseless: bool,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let setting = config.setting()?;
        let function = ConvexFunction::new(config.function.clone())?;
        Ok(Experiment {
            config,
            function,
            setting,
            noiseless: false,
        })
    }

    /// Test mode: realized noise is switched off while every threshold keeps
    /// the nominal noise level.
    pub fn noiseless(mut self) -> Self {
        self.noiseless = true;
        self
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn function(&self) -> &ConvexFunction {
        &self.function
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn alpha(&self) -> Probability {
        self.config.alpha
    }

    /// Runs both procedures for one replication.
    pub fn simulate(&self, rep: u64) -> Result<ProcedureResult> {
        let seed = replication_seed(self.config.base_seed, rep);
        let alpha = self.config.alpha;
        match self.setting {
            Setting::Whitenoise { eps, j_max } => {
                let mut store = if self.noiseless {
                    PathStore::noiseless(&self.function, eps, j_max)?
                } else {
                    PathStore::new(&self.function, eps, seed, j_max)?
                };
                whitenoise::run_on_store(&mut store, alpha)
            }
            Setting::Regression { n, sigma } => {
                if self.noiseless {
                    let y = (0..=n).map(|i| self.function.value(i as f64 / n as f64)).collect();
                    let sample = RegressionSample::new(n, sigma, y)?;
                    let split = SplitSample::noiseless(&sample);
                    regression::run_on_split(&split, alpha, derive_seed(seed, stream::SUB_SEED, 0))
                } else {
                    let sample = RegressionSample::simulate(&self.function, n, sigma, seed)?;
                    regression::run(&sample, alpha, seed)
                }
            }
        }
    }

    /// One replication scored against the truth; failures carry the index.
    pub fn run_replication(&self, rep: u64) -> Result<ReplicationRecord> {
        let seed = replication_seed(self.config.base_seed, rep);
        let result = self.simulate(rep).map_err(|e| Error::Replication {
            rep,
            source: Box::new(e),
        })?;
        Ok(ReplicationRecord::score(rep, seed, &result, self.function.truth()))
    }

    /// Water-filling benchmarks at the effective noise level.
    pub fn benchmarks(&self) -> Result<(f64, f64)> {
        let noise = self.setting.effective_noise();
        Ok((
            benchmarks::rho_z(&self.function, noise)?,
            benchmarks::rho_m(&self.function, noise)?,
        ))
    }
}

/// Seed of replication `rep`.
pub fn replication_seed(base_seed: u64, rep: u64) -> u64 {
    derive_seed(base_seed, stream::REPLICATION_SEED, rep)
}

/// One row of the per-replication CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: u64,
    pub seed: u64,
    pub j_hat: u32,
    pub forced: bool,
    pub z_hat: f64,
    pub z_err: f64,
    pub ci_z_lo: f64,
    pub ci_z_hi: f64,
    pub ci_z_len: f64,
    pub ci_z_cov: bool,
    pub m_hat: f64,
    pub m_err: f64,
    pub ci_m_lo: f64,
    pub ci_m_hi: f64,
    pub ci_m_len: f64,
    pub ci_m_cov: bool,
}

impl ReplicationRecord {
    pub fn score(rep: u64, seed: u64, r: &ProcedureResult, truth: ExtremumTruth) -> Self {
        ReplicationRecord {
            rep,
            seed,
            j_hat: r.j_hat,
            forced: r.forced,
            z_hat: r.z_hat,
            z_err: (r.z_hat - truth.z).abs(),
            ci_z_lo: r.ci_z.lo,
            ci_z_hi: r.ci_z.hi,
            ci_z_len: r.ci_z.length(),
            ci_z_cov: r.ci_z.contains(truth.z),
            m_hat: r.m_hat,
            m_err: (r.m_hat - truth.m).abs(),
            ci_m_lo: r.ci_m.lo,
            ci_m_hi: r.ci_m.hi,
            ci_m_len: r.ci_m.length(),
            ci_m_cov: r.ci_m.contains(truth.m),
        }
    }
}

/// Sample mean and its Monte Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
}

impl MeanEstimate {
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let (count, sum) = values.clone().fold((0_u64, 0.0), |(c, s), v| (c + 1, s + v));
        if count == 0 {
            return MeanEstimate { mean: f64::NAN, se: f64::NAN };
        }
        let n = count as f64;
        let mean = sum / n;
        if count == 1 {
            return MeanEstimate { mean, se: 0.0 };
        }
        let ss = values.fold(0.0, |acc, v| acc + (v - mean) * (v - mean));
        MeanEstimate {
            mean,
            se: (ss / (n - 1.0) / n).sqrt(),
        }
    }

    /// Proportion of `true` with the binomial standard error.
    pub fn proportion(flags: impl Iterator<Item = bool>) -> Self {
        let (count, hits) = flags.fold((0_u64, 0_u64), |(c, h), b| (c + 1, h + b as u64));
        if count == 0 {
            return MeanEstimate { mean: f64::NAN, se: f64::NAN };
        }
        let p = hits as f64 / count as f64;
        MeanEstimate {
            mean: p,
            se: (p * (1.0 - p) / count as f64).sqrt(),
        }
    }
}

/// Descriptive fields of a summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetadata {
    pub model: Model,
    pub function: FunctionSpec,
    pub eps: Option<f64>,
    pub n: Option<usize>,
    pub sigma: Option<f64>,
    /// `eps` for white noise, `sigma / sqrt(n)` for regression; the
    /// benchmarks are evaluated here.
    pub effective_noise: f64,
    pub alpha: f64,
    pub replications: u64,
    pub base_seed: u64,
    pub true_z: f64,
    pub true_m: f64,
    pub rho_z: f64,
    pub rho_m: f64,
}

/// Aggregates over all replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub metadata: SummaryMetadata,
    pub z_err: MeanEstimate,
    pub m_err: MeanEstimate,
    pub ci_z_len: MeanEstimate,
    pub ci_m_len: MeanEstimate,
    pub coverage_z: MeanEstimate,
    pub coverage_m: MeanEstimate,
    pub forced_rate: f64,
    /// mean |Ẑ - Z| / ρ_z
    pub z_err_ratio: f64,
    /// mean |M̂ - M| / ρ_m
    pub m_err_ratio: f64,
    /// mean CI_z length / ρ_z
    pub ci_z_len_ratio: f64,
    /// mean CI_m length / ρ_m
    pub ci_m_len_ratio: f64,
}

impl ExperimentSummary {
    pub fn from_records(experiment: &Experiment, records: &[ReplicationRecord]) -> Result<Self> {
        let (rho_z, rho_m) = experiment.benchmarks()?;
        let truth = experiment.function().truth();
        let config = experiment.config();
        let setting = experiment.setting();
        let (eps, n, sigma) = match setting {
            Setting::Whitenoise { eps, .. } => (Some(eps), None, None),
            Setting::Regression { n, sigma } => (None, Some(n), Some(sigma)),
        };
        let it = records.iter();
        let z_err = MeanEstimate::of(it.clone().map(|r| r.z_err));
        let m_err = MeanEstimate::of(it.clone().map(|r| r.m_err));
        let ci_z_len = MeanEstimate::of(it.clone().map(|r| r.ci_z_len));
        let ci_m_len = MeanEstimate::of(it.clone().map(|r| r.ci_m_len));
        Ok(ExperimentSummary {
            metadata: SummaryMetadata {
                model: setting.model(),
                function: config.function.clone(),
                eps,
                n,
                sigma,
                effective_noise: setting.effective_noise(),
                alpha: config.alpha.get(),
                replications: records.len() as u64,
                base_seed: config.base_seed,
                true_z: truth.z,
                true_m: truth.m,
                rho_z,
                rho_m,
            },
            coverage_z: MeanEstimate::proportion(it.clone().map(|r| r.ci_z_cov)),
            coverage_m: MeanEstimate::proportion(it.clone().map(|r| r.ci_m_cov)),
            forced_rate: MeanEstimate::proportion(it.map(|r| r.forced)).mean,
            z_err_ratio: z_err.mean / rho_z,
            m_err_ratio: m_err.mean / rho_m,
            ci_z_len_ratio: ci_z_len.mean / rho_z,
            ci_m_len_ratio: ci_m_len.mean / rho_m,
            z_err,
            m_err,
            ci_z_len,
            ci_m_len,
        })
    }
}

/// Records and their summary.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutcome {
    pub records: Vec<ReplicationRecord>,
    pub summary: ExperimentSummary,
}

/// A run that stopped at a failing replication: the records of all earlier
/// replications and the error of the first failure.
#[derive(Debug)]
pub struct PartialRun {
    pub records: Vec<ReplicationRecord>,
    pub error: Error,
}

/// Runs every replication; the first failure (by replication index) aborts.
pub fn run_replications(
    experiment: &Experiment,
    execution: Execution,
) -> std::result::Result<Vec<ReplicationRecord>, PartialRun> {
    let reps = experiment.config().replications;
    let results = map_replications(experiment, reps, execution).map_err(|error| PartialRun {
        records: Vec::new(),
        error,
    })?;
    let mut records = Vec::with_capacity(results.len());
    for result in results {
        match result {
            Ok(record) => records.push(record),
            Err(error) => return Err(PartialRun { records, error }),
        }
    }
    Ok(records)
}

fn map_serial(experiment: &Experiment, reps: u64) -> Vec<Result<ReplicationRecord>> {
    let mut out = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let result = experiment.run_replication(rep);
        let failed = result.is_err();
        out.push(result);
        if failed {
            break;
        }
    }
    out
}

#[cfg(feature = "parallel")]
fn map_replications(
    experiment: &Experiment,
    reps: u64,
    execution: Execution,
) -> Result<Vec<Result<ReplicationRecord>>> {
    use rayon::prelude::*;
    let par = || -> Vec<Result<ReplicationRecord>> {
        (0..reps)
            .into_par_iter()
            .map(|rep| experiment.run_replication(rep))
            .collect()
    };
    match execution {
        Execution::Serial => Ok(map_serial(experiment, reps)),
        Execution::Parallel => Ok(par()),
        Execution::ParallelWith(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::domain(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(par))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn map_replications(
    experiment: &Experiment,
    reps: u64,
    _execution: Execution,
) -> Result<Vec<Result<ReplicationRecord>>> {
    Ok(map_serial(experiment, reps))
}

/// Runs all replications and summarizes them.
pub fn run_experiment(
    experiment: &Experiment,
    execution: Execution,
) -> std::result::Result<ExperimentOutcome, PartialRun> {
    let records = run_replications(experiment, execution)?;
    match ExperimentSummary::from_records(experiment, &records) {
        Ok(summary) => Ok(ExperimentOutcome { records, summary }),
        Err(error) => Err(PartialRun { records, error }),
    }
}
