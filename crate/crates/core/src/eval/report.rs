use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::io_json::{fmt_real, write_json};
use crate::error::{Error, Result};

use super::experiment::Method;

/// One method on one train/test pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    /// Requested training size for simulated data; `None` for folds.
    pub size: Option<usize>,
    /// Realized training rows.
    pub train_size: usize,
    pub trial: usize,
    pub fold: usize,
    pub method: String,
    pub auc_entire: Option<f64>,
    pub auc_confounded: Option<f64>,
    pub confounded_size: usize,
    /// Hash of the exact inputs; equal for every method of a cell.
    pub data_hash: String,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSetKind {
    Entire,
    Confounded,
}

impl TestSetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TestSetKind::Entire => "entire",
            TestSetKind::Confounded => "confounded",
        }
    }

    fn of(self, cell: &CellOutcome) -> Option<f64> {
        match self {
            TestSetKind::Entire => cell.auc_entire,
            TestSetKind::Confounded => cell.auc_confounded,
        }
    }
}

/// Aggregate over every successful (trial, fold) value of one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub size: Option<usize>,
    pub method: String,
    pub test_set_kind: TestSetKind,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation of the per-fold values.
    pub sd: f64,
    /// Standard error of the per-trial means; absent with a single trial.
    pub se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub cells: Vec<CellOutcome>,
    pub summaries: Vec<Summary>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl ExperimentReport {
    pub fn new(name: String, seed: u64, cells: Vec<CellOutcome>) -> Self {
        let summaries = summarize(&cells);
        Self {
            name,
            seed,
            cells,
            summaries,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellOutcome> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    pub fn summary(&self, size: Option<usize>, method: &str, kind: TestSetKind) -> Option<&Summary> {
        self.summaries
            .iter()
            .find(|s| s.size == size && s.method == method && s.test_set_kind == kind)
    }

    /// `method,trial,fold,test_set_kind,auc,train_size`, one row per
    /// successful score.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,trial,fold,test_set_kind,auc,train_size\n");
        for cell in &self.cells {
            for kind in [TestSetKind::Entire, TestSetKind::Confounded] {
                if let Some(a) = kind.of(cell) {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        cell.method,
                        cell.trial,
                        cell.fold,
                        kind.as_str(),
                        fmt_real(a),
                        cell.train_size
                    );
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// Methods as rows, entire/confounded test sets as columns, cells as
    /// `mean (sd)`. One block per training size.
    pub fn table(&self) -> String {
        let mut sizes: Vec<Option<usize>> = Vec::new();
        let mut methods: Vec<&str> = Vec::new();
        for s in &self.summaries {
            if !sizes.contains(&s.size) {
                sizes.push(s.size);
            }
            if !methods.contains(&s.method.as_str()) {
                methods.push(&s.method);
            }
        }
        let label = |id: &str| -> String {
            serde_json::from_value::<Method>(serde_json::Value::String(id.to_string()))
                .map(|m| m.display().to_string())
                .unwrap_or_else(|_| id.to_string())
        };
        let cell = |size: Option<usize>, m: &str, kind: TestSetKind| {
            self.summary(size, m, kind)
                .map_or("-".to_string(), |s| format!("{:.2} ({:.2})", s.mean, s.sd))
        };
        let width = methods.iter().map(|m| label(m).len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        for (i, &size) in sizes.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            if let Some(size) = size {
                let _ = writeln!(out, "training size {size}");
            }
            let _ = writeln!(out, "{:<width$}  {:>14}  {:>14}", "method", "entire test", "confounded test");
            for m in &methods {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>14}  {:>14}",
                    label(m),
                    cell(size, m, TestSetKind::Entire),
                    cell(size, m, TestSetKind::Confounded)
                );
            }
        }
        out
    }
}

/// Groups by size (ascending), then methods in first-appearance order.
pub fn summarize(cells: &[CellOutcome]) -> Vec<Summary> {
    let mut keys: Vec<(Option<usize>, &str)> = Vec::new();
    for c in cells {
        if !keys.contains(&(c.size, c.method.as_str())) {
            keys.push((c.size, &c.method));
        }
    }
    keys.sort_by_key(|&(size, _)| size);
    let mut out = Vec::new();
    for (size, method) in keys {
        for kind in [TestSetKind::Entire, TestSetKind::Confounded] {
            let group: Vec<&CellOutcome> = cells
                .iter()
                .filter(|c| c.size == size && c.method == method && kind.of(c).is_some())
                .collect();
            if group.is_empty() {
                continue;
            }
            let values: Vec<f64> = group.iter().filter_map(|c| kind.of(c)).collect();
            let mut trials: Vec<usize> = group.iter().map(|c| c.trial).collect();
            trials.dedup();
            trials.sort_unstable();
            trials.dedup();
            let se = (trials.len() > 1).then(|| {
                let trial_means: Vec<f64> = trials
                    .iter()
                    .map(|&t| {
                        let v: Vec<f64> = group.iter().filter(|c| c.trial == t).filter_map(|c| kind.of(c)).collect();
                        mean(&v)
                    })
                    .collect();
                sample_sd(&trial_means) / (trial_means.len() as f64).sqrt()
            });
            out.push(Summary {
                size,
                method: method.to_string(),
                test_set_kind: kind,
                count: values.len(),
                mean: mean(&values),
                sd: sample_sd(&values),
                se,
            });
        }
    }
    out
}
