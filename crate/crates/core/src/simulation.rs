//! Monte Carlo engine: data generation, seeded replication substreams and
//! the built-in experiment set.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    bona_fide_olse, olse_covariance_inverse, oracle_equivariant, oracle_olse, sample_inverse, EstimatorId,
    PrecisionEstimate, TargetMatrix,
};
use crate::linalg::{sample_covariance, sample_covariance_centered, DataMatrix, SampleStats};
use crate::metrics::{frobenius_loss, ordered_mean, summarize, EntryStatus, LossSamples, PrialEntry, PrialReport};
use crate::spectral::{build_covariance, three_block_spectrum, CovarianceModel, SpectrumSpec};

/// Entry distribution of the standardized noise `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Gaussian,
    StudentT {
        degrees_of_freedom: f64,
        /// Accept `2 < df ≤ 4`, where fourth moments are infinite.
        #[serde(default)]
        allow_heavy_tails: bool,
    },
}

impl DistributionSpec {
    pub fn student_t(degrees_of_freedom: f64) -> Self {
        DistributionSpec::StudentT {
            degrees_of_freedom,
            allow_heavy_tails: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let DistributionSpec::StudentT {
            degrees_of_freedom: df,
            allow_heavy_tails,
        } = *self
        {
            if !(df > 2.0) || !df.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "student-t needs more than 2 degrees of freedom for a finite variance, got {df}"
                )));
            }
            if df <= 4.0 && !allow_heavy_tails {
                return Err(Error::InvalidInput(format!(
                    "student-t with {df} degrees of freedom lacks finite fourth moments; set allow_heavy_tails to run anyway"
                )));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            DistributionSpec::Gaussian => "gaussian".into(),
            DistributionSpec::StudentT { degrees_of_freedom, .. } => format!("student_t({degrees_of_freedom})"),
        }
    }
}

/// How a shrinkage target is built at each dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    /// `Π₀ = I/p`
    IdentityOverP,
    /// `Π₀ = Σ⁻¹`
    TruePrecision,
    /// `Π₀ = Σ₀⁻¹` for a prior covariance with the given spectrum.
    InverseOf { name: String, spectrum: SpectrumSpec },
}

impl TargetSpec {
    pub fn label(&self) -> String {
        match self {
            TargetSpec::IdentityOverP => "identity_over_p".into(),
            TargetSpec::TruePrecision => "true_precision".into(),
            TargetSpec::InverseOf { name, .. } => format!("inverse_of:{name}"),
        }
    }

    /// Precision target `Π₀` and the covariance target `Σ₀` handed to the
    /// covariance shrinkage benchmark.
    pub fn build(&self, truth: &CovarianceModel) -> Result<(TargetMatrix, TargetMatrix)> {
        let p = truth.dim();
        match self {
            TargetSpec::IdentityOverP => {
                Ok((TargetMatrix::identity_over_p(p), TargetMatrix::from_diagonal(&vec![1.0; p])?))
            }
            TargetSpec::TruePrecision => Ok((
                TargetMatrix::true_precision(truth),
                TargetMatrix::new(truth.sigma().clone())?,
            )),
            TargetSpec::InverseOf { spectrum, .. } => {
                let prior = build_covariance(spectrum, p, truth.basis().cloned())?;
                Ok((TargetMatrix::inverse_of(&prior), TargetMatrix::new(prior.sigma().clone())?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub spectrum: SpectrumSpec,
    pub targets: Vec<TargetSpec>,
    pub c: f64,
    pub p_grid: Vec<usize>,
    pub distribution: DistributionSpec,
    pub replications: usize,
    pub seed: Option<u64>,
    pub estimators: Vec<EstimatorId>,
    #[serde(default)]
    pub clamp: bool,
    #[serde(default)]
    pub center: bool,
}

impl ExperimentConfig {
    pub fn sample_size(&self, p: usize) -> usize {
        (p as f64 / self.c).round() as usize
    }

    pub fn baseline(&self) -> EstimatorId {
        if self.c < 1.0 {
            EstimatorId::SampleInv
        } else {
            EstimatorId::SamplePinv
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) || self.c == 1.0 {
            return Err(Error::Config(format!("c = {} must be positive and different from 1", self.c)));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.p_grid.is_empty() {
            return Err(Error::Config("p_grid is empty".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators requested".into()));
        }
        if self.estimators.iter().any(|e| e.uses_target()) && self.targets.is_empty() {
            return Err(Error::Config("target-based estimators requested without targets".into()));
        }
        for &p in &self.p_grid {
            if p == 0 {
                return Err(Error::Config("p_grid contains 0".into()));
            }
            let n = self.sample_size(p);
            let min_n = if self.center { 3 } else { 2 };
            if n < min_n {
                return Err(Error::Config(format!("p = {p} gives n = {n}, below {min_n}")));
            }
        }
        self.distribution.validate()?;
        Ok(())
    }

    /// Estimator/target pairs evaluated at each grid point.
    pub fn work_items(&self) -> Vec<WorkItem> {
        let mut items = Vec::new();
        for &estimator in &self.estimators {
            if estimator.uses_target() {
                for (t, target) in self.targets.iter().enumerate() {
                    items.push(WorkItem {
                        estimator,
                        target: Some(t),
                        label: Some(target.label()),
                    });
                }
            } else {
                items.push(WorkItem {
                    estimator,
                    target: None,
                    label: None,
                });
            }
        }
        items
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkItem {
    pub estimator: EstimatorId,
    /// Index into `ExperimentConfig::targets`.
    pub target: Option<usize>,
    pub label: Option<String>,
}

/// Why `estimator` cannot run at concentration `c`, if it cannot.
pub fn regime_conflict(estimator: EstimatorId, c: f64) -> Option<&'static str> {
    match estimator {
        EstimatorId::SampleInv | EstimatorId::OlsePrecision if c > 1.0 => Some("requires p < n"),
        EstimatorId::SamplePinv if c < 1.0 => Some("requires p > n"),
        _ => None,
    }
}

/// Outcome of one estimator in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemOutcome {
    pub loss: f64,
    pub weights: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub index: usize,
    pub baseline: std::result::Result<f64, String>,
    /// Aligned with the work items; `None` for skipped items.
    pub outcomes: Vec<Option<std::result::Result<ItemOutcome, String>>>,
}

/// Independent stream for replication `r` at dimension `p`.
pub fn replication_rng(seed: u64, p: usize, r: usize) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(p as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(r as u64).to_le_bytes());
    key[24..].copy_from_slice(b"replicat");
    ChaCha20Rng::from_seed(key)
}

/// Draws `Y = Σ^{1/2}X` with `X` a `p × n` matrix of i.i.d. unit-variance
/// entries filled column by column.
pub fn generate_data<R: Rng>(truth: &CovarianceModel, n: usize, dist: &DistributionSpec, rng: &mut R) -> Result<DataMatrix> {
    dist.validate()?;
    let p = truth.dim();
    let len = p * n;
    let mut values = Vec::with_capacity(len);
    match *dist {
        DistributionSpec::Gaussian => {
            for _ in 0..len {
                values.push(StandardNormal.sample(rng));
            }
        }
        DistributionSpec::StudentT { degrees_of_freedom: df, .. } => {
            let t = StudentT::new(df).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let scale = ((df - 2.0) / df).sqrt();
            for _ in 0..len {
                values.push(t.sample(rng) * scale);
            }
        }
    }
    let x = DMatrix::from_vec(p, n, values);
    DataMatrix::new(truth.apply_sqrt(&x))
}

/// Everything fixed at one grid point.
struct GridPoint<'a> {
    config: &'a ExperimentConfig,
    truth: CovarianceModel,
    targets: Vec<(TargetMatrix, TargetMatrix)>,
    items: Vec<WorkItem>,
    p: usize,
    n: usize,
}

impl GridPoint<'_> {
    fn evaluate(&self, item: &WorkItem, stats: &SampleStats) -> Result<PrecisionEstimate> {
        let target = item.target.map(|t| &self.targets[t]);
        match item.estimator {
            EstimatorId::SampleInv | EstimatorId::SamplePinv => Ok(sample_inverse(stats)),
            EstimatorId::OlsePrecision => bona_fide_olse(stats, &target.expect("target").0, self.config.clamp),
            EstimatorId::OlsePrecisionOracle => oracle_olse(stats, &self.truth, &target.expect("target").0),
            EstimatorId::OlseCovInv => olse_covariance_inverse(stats, &target.expect("target").1),
            EstimatorId::EvOracle => oracle_equivariant(stats, &self.truth),
        }
    }

    fn replicate(&self, seed: u64, r: usize) -> ReplicationResult {
        let mut rng = replication_rng(seed, self.p, r);
        let stats = generate_data(&self.truth, self.n, &self.config.distribution, &mut rng).and_then(|data| {
            if self.config.center {
                sample_covariance_centered(&data)
            } else {
                sample_covariance(&data)
            }
        });
        let stats = match stats {
            Ok(s) => s,
            Err(e) => {
                let msg = e.to_string();
                return ReplicationResult {
                    index: r,
                    baseline: Err(msg.clone()),
                    outcomes: self
                        .items
                        .iter()
                        .map(|item| regime_conflict(item.estimator, self.config.c).map_or(Some(Err(msg.clone())), |_| None))
                        .collect(),
                };
            }
        };
        let precision = self.truth.precision();
        let baseline = frobenius_loss(stats.inverse(), precision).map_err(|e| e.to_string());
        let outcomes = self
            .items
            .iter()
            .map(|item| {
                if regime_conflict(item.estimator, self.config.c).is_some() {
                    return None;
                }
                Some(
                    self.evaluate(item, &stats)
                        .and_then(|est| {
                            Ok(ItemOutcome {
                                loss: frobenius_loss(&est.matrix, precision)?,
                                weights: est.weights.map(|w| (w.alpha, w.beta)),
                            })
                        })
                        .map_err(|e| e.to_string()),
                )
            })
            .collect();
        ReplicationResult {
            index: r,
            baseline,
            outcomes,
        }
    }
}

fn grid_point(config: &ExperimentConfig, p: usize) -> Result<GridPoint<'_>> {
    let truth = build_covariance(&config.spectrum, p, None)?;
    let targets = config
        .targets
        .iter()
        .map(|t| t.build(&truth))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridPoint {
        config,
        truth,
        targets,
        items: config.work_items(),
        p,
        n: config.sample_size(p),
    })
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

fn require_seed(config: &ExperimentConfig) -> Result<u64> {
    config
        .seed
        .ok_or_else(|| Error::Config(format!("experiment '{}' has no seed", config.name)))
}

/// Raw per-replication results at dimension `p`, in replication order.
pub fn run_replications(config: &ExperimentConfig, p: usize, threads: usize) -> Result<Vec<ReplicationResult>> {
    config.validate()?;
    let seed = require_seed(config)?;
    let point = grid_point(config, p)?;
    let pool = thread_pool(threads)?;
    Ok(pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|r| point.replicate(seed, r))
            .collect()
    }))
}

fn aggregate(config: &ExperimentConfig, p: usize, n: usize, items: &[WorkItem], results: &[ReplicationResult]) -> PrialReport {
    let baseline = config.baseline();
    let baseline_error = results.iter().find_map(|r| r.baseline.as_ref().err().cloned());
    let baseline_mean_loss = match baseline_error {
        Some(_) => f64::NAN,
        None => ordered_mean(results.iter().map(|r| *r.baseline.as_ref().expect("checked"))),
    };

    let mut entries: Vec<PrialEntry> = Vec::with_capacity(items.len());
    for (k, item) in items.iter().enumerate() {
        if let Some(reason) = regime_conflict(item.estimator, config.c) {
            entries.push(PrialEntry {
                estimator: item.estimator,
                target: item.label.clone(),
                mean_loss: f64::NAN,
                prial_percent: f64::NAN,
                mean_alpha: None,
                mean_beta: None,
                replications: 0,
                status: EntryStatus::Skipped(reason.into()),
            });
            continue;
        }
        let mut samples = LossSamples::default();
        let mut failure = None;
        for r in results {
            match r.outcomes[k].as_ref().expect("not skipped") {
                Ok(o) => samples.push(o.loss, o.weights),
                Err(e) => {
                    failure.get_or_insert_with(|| e.clone());
                }
            }
        }
        let mut entry = summarize(item.estimator, item.label.clone(), &samples, baseline_mean_loss);
        if let Some(reason) = failure.or_else(|| baseline_error.clone()) {
            entry.prial_percent = f64::NAN;
            entry.status = EntryStatus::Failed(reason);
        }
        entries.push(entry);
    }
    PrialReport {
        p,
        n,
        c: config.c,
        baseline,
        baseline_mean_loss,
        entries,
    }
}

/// Runs every grid point of `config` and aggregates per estimator.
///
/// Replication `r` at dimension `p` draws from its own stream keyed by
/// `(seed, p, r)`, and aggregation sums in replication order, so the report
/// is bit-identical for any `threads`.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<Vec<PrialReport>> {
    config.validate()?;
    let seed = require_seed(config)?;
    let pool = thread_pool(threads)?;
    let mut reports = Vec::with_capacity(config.p_grid.len());
    for &p in &config.p_grid {
        let point = grid_point(config, p)?;
        let results: Vec<ReplicationResult> = pool.install(|| {
            (0..config.replications)
                .into_par_iter()
                .map(|r| point.replicate(seed, r))
                .collect()
        });
        reports.push(aggregate(config, p, point.n, &point.items, &results));
    }
    Ok(reports)
}

/// The five prior spectra used to probe how separation between the prior
/// and the true spectrum affects the shrinkage estimators.
pub fn separation_priors() -> Vec<(String, SpectrumSpec)> {
    let triples: [(f64, f64, f64); 5] = [
        (1.0, 5.0, 10.0),
        (1.0, 2.0, 4.0),
        (1.0, 2.0, 60.0),
        (0.1, 1.0, 1000.0),
        (0.1, 0.5, 1.0),
    ];
    triples
        .iter()
        .enumerate()
        .map(|(i, &(a, b, c))| {
            (
                format!("prior{}", i + 1),
                SpectrumSpec::from_pairs(&[(0.2, a), (0.4, b), (0.4, c)]).expect("valid prior"),
            )
        })
        .collect()
}

/// Default prior spectrum `{(0.2, 1), (0.4, 2), (0.4, 4)}`.
pub fn default_prior() -> SpectrumSpec {
    separation_priors().swap_remove(1).1
}

const BUILTIN_SEED: u64 = 20_170_101;

/// Named experiment definitions reproducing the simulation study.
pub fn builtin_experiments() -> Vec<ExperimentConfig> {
    let prior = TargetSpec::InverseOf {
        name: "prior2".into(),
        spectrum: default_prior(),
    };
    let lt1_estimators = vec![
        EstimatorId::SampleInv,
        EstimatorId::OlsePrecision,
        EstimatorId::OlsePrecisionOracle,
        EstimatorId::OlseCovInv,
        EstimatorId::EvOracle,
    ];
    let base = |name: &str, c: f64, p_grid: Vec<usize>| ExperimentConfig {
        name: name.into(),
        spectrum: three_block_spectrum(),
        targets: vec![TargetSpec::IdentityOverP, prior.clone()],
        c,
        p_grid,
        distribution: DistributionSpec::Gaussian,
        replications: 1000,
        seed: Some(BUILTIN_SEED),
        estimators: lt1_estimators.clone(),
        clamp: false,
        center: false,
    };

    let fig1 = base("fig1", 1.0 / 3.0, (1..=40).map(|k| 5 * k).collect());

    let mut fig2 = base("fig2", 1.0 / 3.0, (1..=40).map(|k| 5 * k).collect());
    fig2.targets = separation_priors()
        .into_iter()
        .map(|(name, spectrum)| TargetSpec::InverseOf { name, spectrum })
        .chain([TargetSpec::IdentityOverP, TargetSpec::TruePrecision])
        .collect();

    let fig3a = base("fig3a", 0.5, (1..=40).map(|k| 5 * k).collect());
    let fig3b = base("fig3b", 0.8, (1..=10).map(|k| 20 * k).collect());

    let mut fig4 = base("fig4", 1.0 / 3.0, (1..=10).map(|k| 50 * k).collect());
    fig4.distribution = DistributionSpec::student_t(10.0);

    let mut fig5 = base("fig5", 1.5, (1..=20).map(|k| 20 * k).collect());
    fig5.targets = vec![TargetSpec::IdentityOverP];
    fig5.estimators = vec![
        EstimatorId::SamplePinv,
        EstimatorId::OlsePrecisionOracle,
        EstimatorId::OlseCovInv,
        EstimatorId::EvOracle,
    ];

    vec![fig1, fig2, fig3a, fig3b, fig4, fig5]
}

pub fn builtin_experiment(name: &str) -> Option<ExperimentConfig> {
    builtin_experiments().into_iter().find(|c| c.name == name)
}
