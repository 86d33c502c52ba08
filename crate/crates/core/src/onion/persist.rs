use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{OnionFitReport, OrthonormalBasis};
use crate::data::io_json::{read_json, write_json};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const SIGN_CONVENTION: &str = "YtXw_nonneg";

/// On-disk form of a frozen basis. `columns[j]` is basis vector `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisFile {
    pub p: usize,
    pub m: usize,
    pub columns: Vec<Vec<f64>>,
    pub sign_convention: String,
    pub fit_report: OnionFitReport,
}

impl BasisFile {
    pub fn new<F: Scalar>(basis: &OrthonormalBasis<F>, report: &OnionFitReport) -> Self {
        Self {
            p: basis.p(),
            m: basis.m(),
            columns: basis
                .columns()
                .columns()
                .into_iter()
                .map(|c| c.iter().map(|v| v.to_f64_lossy()).collect())
                .collect(),
            sign_convention: SIGN_CONVENTION.to_string(),
            fit_report: report.clone(),
        }
    }

    pub fn basis<F: Scalar>(&self) -> Result<OrthonormalBasis<F>> {
        if self.columns.len() != self.m || self.columns.iter().any(|c| c.len() != self.p) {
            return Err(Error::InvalidData(format!(
                "basis file declares {}x{} but columns do not match",
                self.p, self.m
            )));
        }
        if self.sign_convention != SIGN_CONVENTION {
            return Err(Error::InvalidData(format!(
                "unknown sign convention {:?}",
                self.sign_convention
            )));
        }
        let w = Array2::from_shape_fn((self.p, self.m), |(i, j)| F::lit(self.columns[j][i]));
        let tol = F::lit(1e-8).max(F::epsilon() * F::lit(100.0));
        OrthonormalBasis::from_columns(w, tol)
    }
}

pub fn save_basis<F: Scalar>(path: &Path, basis: &OrthonormalBasis<F>, report: &OnionFitReport) -> Result<()> {
    write_json(path, &BasisFile::new(basis, report))
}

pub fn load_basis<F: Scalar>(path: &Path) -> Result<(OrthonormalBasis<F>, OnionFitReport)> {
    let file: BasisFile = read_json(path)?;
    Ok((file.basis()?, file.fit_report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.json");
        let s = 0.5f64.sqrt();
        let basis = OrthonormalBasis::from_columns(array![[s], [s], [0.0]], 1e-12).unwrap();
        let report = OnionFitReport {
            iterations_per_confounder: vec![2],
            converged: vec![true],
            captured_covariance: vec![3.5],
            confounder_index: vec![0],
            skipped: vec![],
        };
        save_basis(&path, &basis, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"sign_convention\": \"YtXw_nonneg\""));
        let (back, rep): (OrthonormalBasis<f64>, _) = load_basis(&path).unwrap();
        assert_eq!(back, basis);
        assert_eq!(rep, report);
    }

    #[test]
    fn non_orthonormal_file_rejected() {
        let file = BasisFile {
            p: 2,
            m: 2,
            columns: vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            sign_convention: SIGN_CONVENTION.into(),
            fit_report: OnionFitReport::default(),
        };
        assert!(file.basis::<f64>().is_err());
    }
}
