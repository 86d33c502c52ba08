//! Empirical confounding: the AT-dropout GC-bias metric and biased
//! subsampling of (group, label) cells.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of integer GC-percent bins, 0..=100.
pub const GC_BINS: usize = 101;
/// Last GC percent counted as AT-rich.
pub const AT_RICH_MAX_GC: usize = 50;

/// Expected and observed coverage fractions per GC percent.
#[derive(Clone, Debug, PartialEq)]
pub struct GcProfile {
    expected: Array1<f64>,
    observed: Array1<f64>,
}

impl GcProfile {
    pub fn new(expected: Array1<f64>, observed: Array1<f64>) -> Result<Self> {
        let profile = Self::unnormalized(expected, observed)?;
        for (name, v) in [("expected", &profile.expected), ("observed", &profile.observed)] {
            if v.sum() > 1.0 + 1e-9 {
                return Err(Error::InvalidData(format!("{name} fractions sum above 1")));
            }
        }
        Ok(profile)
    }

    /// Like [`GcProfile::new`] but without the total-mass check, for
    /// histograms in arbitrary units.
    pub fn unnormalized(expected: Array1<f64>, observed: Array1<f64>) -> Result<Self> {
        for (name, v) in [("expected", &expected), ("observed", &observed)] {
            if v.len() != GC_BINS {
                return Err(Error::DimensionMismatch {
                    expected: GC_BINS,
                    actual: v.len(),
                    context: "gc profile bins",
                });
            }
            if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidData(format!("{name} fractions must be finite and non-negative")));
            }
        }
        Ok(Self { expected, observed })
    }

    pub fn expected(&self) -> &Array1<f64> {
        &self.expected
    }

    pub fn observed(&self) -> &Array1<f64> {
        &self.observed
    }

    /// Reads a CSV with header `gc,expected_fraction,observed_fraction`.
    /// Every GC percent must appear exactly once.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::csv(path, format!("missing column {name:?}")))
        };
        let (gc_col, e_col, o_col) = (col("gc")?, col("expected_fraction")?, col("observed_fraction")?);
        let mut expected = vec![f64::NAN; GC_BINS];
        let mut observed = vec![f64::NAN; GC_BINS];
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::csv(path, e))?;
            let field = |c: usize| record.get(c).unwrap_or("").trim();
            let gc: usize = field(gc_col)
                .parse()
                .ok()
                .filter(|&g| g < GC_BINS)
                .ok_or_else(|| Error::csv(path, format!("row {row}: gc must be an integer in 0..=100")))?;
            if !expected[gc].is_nan() {
                return Err(Error::csv(path, format!("row {row}: duplicate gc {gc}")));
            }
            let num = |c: usize| {
                field(c)
                    .parse::<f64>()
                    .map_err(|_| Error::csv(path, format!("row {row}: cannot parse {:?}", field(c))))
            };
            expected[gc] = num(e_col)?;
            observed[gc] = num(o_col)?;
        }
        if let Some(gc) = expected.iter().position(|v| v.is_nan()) {
            return Err(Error::csv(path, format!("gc {gc} missing")));
        }
        Self::new(Array1::from(expected), Array1::from(observed))
    }
}

/// `Σ_{gc ≤ 50} max(E_gc − O_gc, 0)`.
pub fn at_dropout(profile: &GcProfile) -> f64 {
    profile
        .expected
        .iter()
        .zip(&profile.observed)
        .take(AT_RICH_MAX_GC + 1)
        .map(|(e, o)| (e - o).max(0.0))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Below,
    Above,
}

impl Group {
    /// Strictly below the threshold is `Below`; equality goes `Above`.
    pub fn of(value: f64, threshold: f64) -> Self {
        if value < threshold {
            Group::Below
        } else {
            Group::Above
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Below => "below",
            Group::Above => "above",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub group: Group,
    pub label: bool,
}

/// Per-sample group assignment plus the cells to thin.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasSubsampleRule {
    pub groups: Vec<Group>,
    pub drop_probability: f64,
    pub drop_cells: BTreeSet<Cell>,
}

impl BiasSubsampleRule {
    pub fn new(groups: Vec<Group>, drop_probability: f64, drop_cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        if !(0.0..=1.0).contains(&drop_probability) {
            return Err(Error::Config(format!(
                "drop_probability {drop_probability} outside [0, 1]"
            )));
        }
        Ok(Self {
            groups,
            drop_probability,
            drop_cells: drop_cells.into_iter().collect(),
        })
    }

    /// Groups by thresholding arbitrary per-sample values.
    pub fn thresholded(values: &[f64], threshold: f64, drop_probability: f64, drop_cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let groups = values.iter().map(|&v| Group::of(v, threshold)).collect();
        Self::new(groups, drop_probability, drop_cells)
    }
}

/// Thins healthy samples with low AT dropout and cancer samples with high AT
/// dropout (label `true` is cancer).
pub fn gc_confound_rule(dropout_values: &[f64], threshold: f64, drop_probability: f64) -> Result<BiasSubsampleRule> {
    BiasSubsampleRule::thresholded(
        dropout_values,
        threshold,
        drop_probability,
        [
            Cell { group: Group::Below, label: false },
            Cell { group: Group::Above, label: true },
        ],
    )
}

pub const DEFAULT_GC_THRESHOLD: f64 = 3.5;
pub const DEFAULT_DROP_PROBABILITY: f64 = 0.9;

/// Serialized rule: a covariate column is thresholded into groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleRuleSpec {
    pub group_column: String,
    pub threshold: f64,
    #[serde(default = "default_drop_probability")]
    pub drop_probability: f64,
    pub drop_cells: Vec<Cell>,
}

fn default_drop_probability() -> f64 {
    DEFAULT_DROP_PROBABILITY
}

impl SubsampleRuleSpec {
    pub fn resolve<F: Scalar>(&self, dataset: &Dataset<F>) -> Result<BiasSubsampleRule> {
        let column = dataset
            .covariates
            .confounder(&self.group_column)
            .ok_or_else(|| Error::Config(format!("no covariate named {:?}", self.group_column)))?;
        let values: Vec<f64> = column.values.iter().map(|v| v.to_f64_lossy()).collect();
        BiasSubsampleRule::thresholded(&values, self.threshold, self.drop_probability, self.drop_cells.iter().copied())
    }
}

/// Indices retained by `rule`. One uniform draw is consumed per sample in a
/// drop cell, in index order.
pub fn subsample_indices(labels: &[bool], rule: &BiasSubsampleRule, seed: u64) -> Result<Vec<usize>> {
    if rule.groups.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: rule.groups.len(),
            context: "subsample rule groups",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: Vec<usize> = (0..labels.len())
        .filter(|&i| {
            let cell = Cell { group: rule.groups[i], label: labels[i] };
            !rule.drop_cells.contains(&cell) || rng.gen::<f64>() >= rule.drop_probability
        })
        .collect();
    for class in [false, true] {
        if labels.contains(&class) && !keep.iter().any(|&i| labels[i] == class) {
            return Err(Error::EmptyClass { label: class });
        }
    }
    Ok(keep)
}

pub fn biased_subsample<F: Scalar>(dataset: &Dataset<F>, rule: &BiasSubsampleRule, seed: u64) -> Result<Dataset<F>> {
    let keep = subsample_indices(dataset.labels(), rule, seed)?;
    Ok(dataset.select(&keep))
}
