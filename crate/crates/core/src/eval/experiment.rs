//! Multi-trial, multi-fold comparison of methods on shared train/test data.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::report::{CellOutcome, ExperimentReport};
use super::{auc, cell_counts, confounded_test_subset, make_folds};
use crate::confound::{biased_subsample, Group, SubsampleRuleSpec};
use crate::data::{pca_reduce, read_covariates, read_matrix, DataMatrix, Dataset, PreprocessOptions, PreprocessorState};
use crate::error::{Error, Result};
use crate::models::{ancova_filter, dann_fit, logreg_fit, mlp_fit, predict_proba, TrainConfig};
use crate::onion::{onion_fit, onion_transform, OnionConfig};
use crate::simulate::{draw_admitted, sex_like_cohort, sim_draw, sim_world, CohortConfig, SimConfig, SEX_COLUMN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Logreg,
    LogregOnion,
    Mlp,
    Dann,
    LogregAncova,
}

impl Method {
    pub fn id(self) -> &'static str {
        match self {
            Method::Logreg => "logreg",
            Method::LogregOnion => "logreg_onion",
            Method::Mlp => "mlp",
            Method::Dann => "dann",
            Method::LogregAncova => "logreg_ancova",
        }
    }

    pub fn display(self) -> &'static str {
        match self {
            Method::Logreg => "logreg",
            Method::LogregOnion => "logreg+ONION",
            Method::Mlp => "MLP",
            Method::Dann => "DANN",
            Method::LogregAncova => "logreg+ANCOVA",
        }
    }
}

fn default_ancova_alpha() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: Method,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub onion: OnionConfig,
    /// Features with ANCOVA p-value below this level are kept.
    #[serde(default = "default_ancova_alpha")]
    pub ancova_alpha: f64,
    /// Reduce inputs to this many principal components first.
    #[serde(default)]
    pub pca_components: Option<usize>,
}

impl MethodSpec {
    pub fn new(method: Method, train: TrainConfig) -> Self {
        Self {
            method,
            train,
            onion: OnionConfig::default(),
            ancova_alpha: default_ancova_alpha(),
            pca_components: None,
        }
    }
}

fn default_sizes() -> Vec<usize> {
    vec![6000]
}

fn default_test_size() -> usize {
    2000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Each trial draws a world, then for every size a confounded training
    /// set of exactly that size and an unfiltered test set.
    Simulate {
        #[serde(default)]
        sim: SimConfig,
        #[serde(default = "default_sizes")]
        sizes: Vec<usize>,
        #[serde(default = "default_test_size")]
        test_size: usize,
    },
    /// Cross-validation on the synthetic cohort; the optional rule thins the
    /// training side of each fold.
    Cohort {
        #[serde(default)]
        cohort: CohortConfig,
        #[serde(default)]
        subsample: Option<SubsampleRuleSpec>,
    },
    /// Cross-validation on a matrix CSV and covariate CSV.
    Files {
        matrix: PathBuf,
        covariates: PathBuf,
        #[serde(default)]
        subsample: Option<SubsampleRuleSpec>,
    },
}

/// How test samples are grouped for the confounded subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupingSpec {
    pub column: String,
    pub threshold: f64,
}

fn default_fold_count() -> usize {
    5
}

fn default_trials() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub data: DataSource,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_fold_count")]
    pub fold_count: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub preprocess: PreprocessOptions,
    /// Defaults to `Y1` at 0 for simulations and `sex` at 0.5 for cohorts.
    #[serde(default)]
    pub confounded_test: Option<GroupingSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        for m in &self.methods {
            m.train.validate()?;
            if !(0.0..=1.0).contains(&m.ancova_alpha) {
                return Err(Error::Config("ancova_alpha must be in [0, 1]".into()));
            }
        }
        match &self.data {
            DataSource::Simulate { sim, sizes, test_size } => {
                sim.validate()?;
                if sim.k != 2 {
                    return Err(Error::Config("simulated experiments need k = 2".into()));
                }
                if sizes.is_empty() || sizes.contains(&0) || *test_size < 2 {
                    return Err(Error::Config("sizes must be non-empty and positive; test_size >= 2".into()));
                }
            }
            DataSource::Cohort { cohort, .. } => {
                cohort.validate()?;
                self.check_folds()?;
            }
            DataSource::Files { .. } => self.check_folds()?,
        }
        Ok(())
    }

    fn check_folds(&self) -> Result<()> {
        if self.fold_count < 2 {
            return Err(Error::Config("fold_count must be at least 2".into()));
        }
        Ok(())
    }

    fn grouping(&self) -> Option<GroupingSpec> {
        self.confounded_test.clone().or_else(|| match &self.data {
            DataSource::Simulate { .. } => Some(GroupingSpec {
                column: "Y1".into(),
                threshold: 0.0,
            }),
            DataSource::Cohort { .. } => Some(GroupingSpec {
                column: SEX_COLUMN.into(),
                threshold: 0.5,
            }),
            DataSource::Files { .. } => None,
        })
    }
}

/// SplitMix64 finalizer folded over `parts`; gives independent per-unit seeds.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// One train/test pair shared by every method.
struct Cell {
    size: Option<usize>,
    trial: usize,
    fold: usize,
    seed: u64,
    train: Dataset<f64>,
    test: Dataset<f64>,
}

enum Unit {
    Sim { size_index: usize, trial: usize },
    Fold { trial: usize, fold: usize },
}

/// Runs every (trial, fold) cell. `workers` bounds the thread count; the
/// result does not depend on it. Failures of individual method fits are
/// recorded in the report instead of aborting the run.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    config.validate()?;
    let grouping = config.grouping();
    let base = match &config.data {
        DataSource::Simulate { .. } => None,
        DataSource::Cohort { cohort, .. } => Some(sex_like_cohort::<f64>(cohort)?),
        DataSource::Files { matrix, covariates, .. } => {
            let (x, _) = read_matrix::<f64>(matrix)?;
            Some(Dataset::new(x, read_covariates(covariates)?)?)
        }
    };
    if let (Some(ds), Some(g)) = (&base, &grouping) {
        if ds.covariates.confounder(&g.column).is_none() {
            return Err(Error::Config(format!("confounded_test column {:?} not found", g.column)));
        }
    }
    if let Some(ds) = &base {
        if ds.covariates.k() == 0 && needs_confounders(config) {
            return Err(Error::Config("methods need confounders but the data has none".into()));
        }
    }

    let units: Vec<Unit> = match &config.data {
        DataSource::Simulate { sizes, .. } => (0..config.trials)
            .flat_map(|trial| (0..sizes.len()).map(move |size_index| Unit::Sim { size_index, trial }))
            .collect(),
        _ => (0..config.trials)
            .flat_map(|trial| (0..config.fold_count).map(move |fold| Unit::Fold { trial, fold }))
            .collect(),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<Vec<CellOutcome>>> = pool.install(|| {
        units
            .par_iter()
            .map(|unit| {
                let cell = build_cell(config, base.as_ref(), unit)?;
                Ok(run_cell(config, grouping.as_ref(), &cell))
            })
            .collect()
    });
    let mut cells = Vec::new();
    for outcome in outcomes {
        cells.extend(outcome?);
    }
    Ok(ExperimentReport::new(config.name.clone(), config.seed, cells))
}

fn needs_confounders(config: &ExperimentConfig) -> bool {
    config
        .methods
        .iter()
        .any(|m| matches!(m.method, Method::LogregOnion | Method::Dann | Method::LogregAncova))
}

fn build_cell(config: &ExperimentConfig, base: Option<&Dataset<f64>>, unit: &Unit) -> Result<Cell> {
    match (unit, &config.data, base) {
        (&Unit::Sim { size_index, trial }, DataSource::Simulate { sim, sizes, test_size }, _) => {
            let size = sizes[size_index];
            let world_config = SimConfig {
                seed: derive_seed(config.seed, &[0, trial as u64]),
                ..sim.clone()
            };
            let world = sim_world::<f64>(&world_config)?;
            let seed = derive_seed(config.seed, &[1, trial as u64, size as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let train = draw_admitted(&world, &world_config, size, &mut rng)?;
            let test = sim_draw(&world, &world_config, *test_size, &mut rng)?;
            Ok(Cell {
                size: Some(size),
                trial,
                fold: 0,
                seed,
                train,
                test,
            })
        }
        (&Unit::Fold { trial, fold }, source, Some(ds)) => {
            let subsample = match source {
                DataSource::Cohort { subsample, .. } | DataSource::Files { subsample, .. } => subsample.as_ref(),
                DataSource::Simulate { .. } => None,
            };
            let plan = make_folds(ds.labels(), config.fold_count, derive_seed(config.seed, &[2, trial as u64]))?;
            let (train_idx, test_idx) = plan.split(fold);
            let seed = derive_seed(config.seed, &[3, trial as u64, fold as u64]);
            let mut train = ds.select(&train_idx);
            if let Some(rule) = subsample {
                train = biased_subsample(&train, &rule.resolve(&train)?, seed)?;
            }
            Ok(Cell {
                size: None,
                trial,
                fold,
                seed,
                train,
                test: ds.select(&test_idx),
            })
        }
        _ => unreachable!("units match their data source"),
    }
}

/// Preprocessed matrices handed to every method of a cell.
struct Prepared {
    x_train: DataMatrix<f64>,
    x_test: DataMatrix<f64>,
    confounded: Option<Vec<usize>>,
    hash: String,
}

fn groups_of(ds: &Dataset<f64>, g: &GroupingSpec) -> Result<Vec<Group>> {
    let column = ds
        .covariates
        .confounder(&g.column)
        .ok_or_else(|| Error::Config(format!("confounded_test column {:?} not found", g.column)))?;
    Ok(column.values.iter().map(|&v| Group::of(v, g.threshold)).collect())
}

fn prepare(config: &ExperimentConfig, grouping: Option<&GroupingSpec>, cell: &Cell) -> Result<Prepared> {
    let pre = PreprocessorState::fit(&cell.train.x, &config.preprocess)?;
    let x_train = pre.apply(&cell.train.x)?;
    let x_test = pre.apply(&cell.test.x)?;
    let confounded = match grouping {
        Some(g) => {
            let train_counts = cell_counts(&groups_of(&cell.train, g)?, cell.train.labels());
            Some(confounded_test_subset(
                &groups_of(&cell.test, g)?,
                cell.test.labels(),
                &train_counts,
                derive_seed(cell.seed, &[4]),
            )?)
        }
        None => None,
    };
    let hash = data_hash(cell, &x_train, &x_test, confounded.as_deref());
    Ok(Prepared {
        x_train,
        x_test,
        confounded,
        hash,
    })
}

/// SHA-256 over the exact inputs given to each method.
fn data_hash(cell: &Cell, x_train: &DataMatrix<f64>, x_test: &DataMatrix<f64>, confounded: Option<&[usize]>) -> String {
    let mut h = Sha256::new();
    for (x, ds) in [(x_train, &cell.train), (x_test, &cell.test)] {
        h.update((x.n() as u64).to_le_bytes());
        h.update((x.p() as u64).to_le_bytes());
        for v in x.values().iter() {
            h.update(v.to_le_bytes());
        }
        h.update(ds.labels().iter().map(|&l| u8::from(l)).collect::<Vec<_>>());
        for c in &ds.covariates.confounders {
            h.update(c.name.as_bytes());
            for v in c.values.iter() {
                h.update(v.to_le_bytes());
            }
        }
    }
    for &i in confounded.unwrap_or(&[]) {
        h.update((i as u64).to_le_bytes());
    }
    format!("{:x}", h.finalize())
}

fn run_cell(config: &ExperimentConfig, grouping: Option<&GroupingSpec>, cell: &Cell) -> Vec<CellOutcome> {
    let outcome = |method: Method, hash: String| CellOutcome {
        size: cell.size,
        train_size: cell.train.n(),
        trial: cell.trial,
        fold: cell.fold,
        method: method.id().to_string(),
        auc_entire: None,
        auc_confounded: None,
        confounded_size: 0,
        data_hash: hash,
        error: None,
    };
    let prepared = match prepare(config, grouping, cell) {
        Ok(p) => p,
        Err(e) => {
            return config
                .methods
                .iter()
                .map(|m| CellOutcome {
                    error: Some(e.to_string()),
                    ..outcome(m.method, String::new())
                })
                .collect()
        }
    };
    // Methods run one after another on the same prepared data.
    config
        .methods
        .iter()
        .map(|spec| {
            let mut record = outcome(spec.method, prepared.hash.clone());
            let seed = derive_seed(spec.train.seed, &[cell.seed, 5]);
            match score_method(spec, seed, cell, &prepared) {
                Ok(scores) => {
                    match auc(&scores, cell.test.labels()) {
                        Ok(a) => record.auc_entire = Some(a),
                        Err(e) => record.error = Some(e.to_string()),
                    }
                    if let Some(subset) = &prepared.confounded {
                        let s: Vec<f64> = subset.iter().map(|&i| scores[i]).collect();
                        let l: Vec<bool> = subset.iter().map(|&i| cell.test.labels()[i]).collect();
                        record.confounded_size = subset.len();
                        record.auc_confounded = auc(&s, &l).ok();
                    }
                }
                Err(e) => {
                    log::warn!(
                        "{} failed on trial {} fold {}: {e}",
                        spec.method.id(),
                        cell.trial,
                        cell.fold
                    );
                    record.error = Some(e.to_string());
                }
            }
            record
        })
        .collect()
}

fn score_method(spec: &MethodSpec, seed: u64, cell: &Cell, data: &Prepared) -> Result<Vec<f64>> {
    let train_config = TrainConfig {
        seed,
        ..spec.train.clone()
    };
    let reduced;
    let data = match spec.pca_components {
        Some(c) => {
            let pca = pca_reduce(&data.x_train, &data.x_test, c)?;
            reduced = Prepared {
                x_train: pca.train,
                x_test: pca.test,
                confounded: None,
                hash: String::new(),
            };
            &reduced
        }
        None => data,
    };
    let labels = cell.train.labels();
    let confounders = &cell.train.covariates.confounders;
    let params = match spec.method {
        Method::Logreg => logreg_fit(&data.x_train, labels, &train_config)?.params,
        Method::Mlp => mlp_fit(&data.x_train, labels, &train_config)?.params,
        Method::Dann => dann_fit(&data.x_train, labels, confounders, &train_config, None)?.params,
        Method::LogregOnion => {
            let ys: Vec<_> = confounders.iter().map(|c| c.values.clone()).collect();
            let (basis, report) = onion_fit(&data.x_train, &ys, &spec.onion)?;
            if !report.skipped.is_empty() {
                log::warn!("onion skipped degenerate confounders {:?}", report.skipped);
            }
            let x_train = onion_transform(&data.x_train, &basis)?;
            let x_test = onion_transform(&data.x_test, &basis)?;
            let params = logreg_fit(&x_train, labels, &train_config)?.params;
            return Ok(predict_proba(&params, &x_test)?.to_vec());
        }
        Method::LogregAncova => {
            let keep = ancova_filter(&data.x_train, labels, confounders, spec.ancova_alpha)?;
            if keep.is_empty() {
                return Err(Error::InvalidData("ANCOVA kept no features".into()));
            }
            let params = logreg_fit(&data.x_train.select_columns(&keep), labels, &train_config)?.params;
            return Ok(predict_proba(&params, &data.x_test.select_columns(&keep))?.to_vec());
        }
    };
    Ok(predict_proba(&params, &data.x_test)?.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(0, &[1, 2]);
        assert_ne!(a, derive_seed(0, &[2, 1]));
        assert_ne!(a, derive_seed(1, &[1, 2]));
        assert_eq!(a, derive_seed(0, &[1, 2]));
    }

    #[test]
    fn config_parses_with_defaults() {
        let json = r#"{"data": {"simulate": {"sizes": [100]}}, "methods": [{"method": "logreg"}]}"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        config.validate().unwrap();
        assert_eq!(config.trials, 1);
        assert_eq!(config.grouping().unwrap().column, "Y1");
    }

    #[test]
    fn unknown_method_rejected() {
        let json = r#"{"data": {"simulate": {}}, "methods": [{"method": "svm"}]}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(json).is_err());
    }
}
