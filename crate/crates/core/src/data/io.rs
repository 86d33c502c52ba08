//! Headerless matrix CSV and named covariate CSV, each with a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Covariate, CovariateKind, CovariateSet, DataMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSidecar {
    pub n: usize,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_names: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: CovariateKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSidecar {
    /// Column holding the binary label.
    pub label: String,
    /// Every non-label column, in file order.
    pub covariates: Vec<CovariateSpec>,
}

/// `data/x.csv` → `data/x.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn csv_err(path: &Path, e: impl ToString) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_matrix<F: Scalar>(
    path: &Path,
    x: &DataMatrix<F>,
    feature_names: Option<Vec<String>>,
) -> Result<()> {
    let mut out = String::with_capacity(x.n() * x.p() * 24);
    for row in x.values().rows() {
        let line: Vec<String> = row.iter().map(|v| fmt_real(v.to_f64_lossy())).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    let sidecar = MatrixSidecar {
        n: x.n(),
        p: x.p(),
        feature_names,
    };
    write_json(&sidecar_path(path), &sidecar)
}

/// Reads a matrix; the sidecar is optional, but when present its shape must
/// agree with the file.
pub fn read_matrix<F: Scalar>(path: &Path) -> Result<(DataMatrix<F>, Option<MatrixSidecar>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.display().to_string(),
                cause: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            },
            _ => csv_err(path, e),
        })?;
    let mut flat = Vec::new();
    let mut n = 0;
    let mut p = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        if p.is_some_and(|p| p != record.len()) {
            return Err(csv_err(path, format!("row {n} has {} fields", record.len())));
        }
        p = Some(record.len());
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| csv_err(path, format!("row {n}: cannot parse {field:?}")))?;
            flat.push(F::lit(v));
        }
        n += 1;
    }
    let p = p.unwrap_or(0);
    let values = Array2::from_shape_vec((n, p), flat).map_err(|e| csv_err(path, e))?;
    let x = DataMatrix::new(values)?;
    let side = sidecar_path(path);
    let sidecar = if side.exists() {
        let s: MatrixSidecar = read_json(&side)?;
        if s.n != x.n() || s.p != x.p() {
            return Err(Error::InvalidData(format!(
                "{} declares {}x{} but {} is {}x{}",
                side.display(),
                s.n,
                s.p,
                path.display(),
                x.n(),
                x.p()
            )));
        }
        Some(s)
    } else {
        None
    };
    Ok((x, sidecar))
}

pub fn write_covariates<F: Scalar>(path: &Path, set: &CovariateSet<F>, label_name: &str) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<&str> = set.confounders.iter().map(|c| c.name.as_str()).collect();
    header.push(label_name);
    writer.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..set.n() {
        let mut row: Vec<String> = set
            .confounders
            .iter()
            .map(|c| fmt_real(c.values[i].to_f64_lossy()))
            .collect();
        row.push(if set.label[i] { "1" } else { "0" }.to_string());
        writer.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    let sidecar = CovariateSidecar {
        label: label_name.to_string(),
        covariates: set
            .confounders
            .iter()
            .map(|c| CovariateSpec {
                name: c.name.clone(),
                kind: c.kind,
            })
            .collect(),
    };
    write_json(&sidecar_path(path), &sidecar)
}

/// Reads a covariate CSV (with header row) according to its required sidecar.
pub fn read_covariates<F: Scalar>(path: &Path) -> Result<CovariateSet<F>> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Err(Error::io(
            &side,
            std::io::Error::new(std::io::ErrorKind::NotFound, "covariate sidecar missing"),
        ));
    }
    let sidecar: CovariateSidecar = read_json(&side)?;
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| csv_err(path, format!("missing column {name:?}")))
    };
    let label_col = column(&sidecar.label)?;
    let cov_cols = sidecar
        .covariates
        .iter()
        .map(|c| column(&c.name))
        .collect::<Result<Vec<_>>>()?;
    let mut label = Vec::new();
    let mut values: Vec<Vec<F>> = vec![Vec::new(); cov_cols.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let parse = |col: usize| -> Result<f64> {
            let field = record.get(col).unwrap_or("");
            field
                .trim()
                .parse()
                .map_err(|_| csv_err(path, format!("row {row}: cannot parse {field:?}")))
        };
        let l = parse(label_col)?;
        label.push(match l {
            v if v == 0.0 => false,
            v if v == 1.0 => true,
            v => return Err(csv_err(path, format!("row {row}: label {v} is not 0/1"))),
        });
        for (slot, &col) in values.iter_mut().zip(&cov_cols) {
            slot.push(F::lit(parse(col)?));
        }
    }
    let confounders = sidecar
        .covariates
        .iter()
        .zip(values)
        .map(|(spec, v)| Covariate {
            name: spec.name.clone(),
            kind: spec.kind,
            values: Array1::from(v),
        })
        .collect();
    CovariateSet::new(confounders, label)
}
