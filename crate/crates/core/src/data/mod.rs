//! Observation matrices, covariates and the train-fitted preprocessing
//! pipeline.

mod io;
pub(crate) mod io_json {
    pub(crate) use super::io::{fmt_real, read_json, write_json};
}
mod pca;
mod preprocess;

pub use io::{
    read_covariates, read_matrix, sidecar_path, write_covariates, write_matrix, CovariateSidecar,
    CovariateSpec, MatrixSidecar,
};
pub use pca::{pca_reduce, PcaOutcome, RankDeficient};
pub use preprocess::{
    center_columns, depth_normalize, fit_preprocessor, linear_quantile, PreprocessOptions,
    PreprocessorFile, PreprocessorState,
};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense `n × p` matrix of observations, rows are samples.
///
/// Construction checks that both dimensions are non-zero and every entry is
/// finite.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix<F> {
    values: Array2<F>,
}

impl<F: Scalar> DataMatrix<F> {
    pub fn new(values: Array2<F>) -> Result<Self> {
        let (n, p) = values.dim();
        if n == 0 || p == 0 {
            return Err(Error::InvalidData(format!("matrix must be non-empty, got {n}x{p}")));
        }
        if let Some(((i, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite entry at ({i}, {j})")));
        }
        Ok(Self { values })
    }

    /// Builds a matrix from row-major `f64` rows, converting to `F`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidData("ragged rows".into()));
        }
        let flat = rows.iter().flatten().map(|&v| F::lit(v)).collect();
        let values = Array2::from_shape_vec((n, p), flat)
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<F> {
        &self.values
    }

    pub fn view(&self) -> ArrayView2<'_, F> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<F> {
        self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, F> {
        self.values.row(i)
    }

    /// Rows in the given order. `indices` must be non-empty and in range.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        assert!(!indices.is_empty(), "row selection must be non-empty");
        Self {
            values: self.values.select(Axis(0), indices),
        }
    }

    pub fn select_columns(&self, indices: &[usize]) -> Self {
        assert!(!indices.is_empty(), "column selection must be non-empty");
        Self {
            values: self.values.select(Axis(1), indices),
        }
    }

    pub fn cast<G: Scalar>(&self) -> DataMatrix<G> {
        DataMatrix {
            values: self.values.mapv(|v| G::lit(v.to_f64_lossy())),
        }
    }

    pub(crate) fn from_trusted(values: Array2<F>) -> Self {
        debug_assert!(values.nrows() > 0 && values.ncols() > 0);
        Self { values }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    Continuous,
    /// Two-level categorical variable. Values must lie in `{-1, 0, 1}`; the
    /// positive level is any value above zero.
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Covariate<F> {
    pub name: String,
    pub kind: CovariateKind,
    pub values: Array1<F>,
}

impl<F: Scalar> Covariate<F> {
    pub fn continuous(name: impl Into<String>, values: Array1<F>) -> Self {
        Self {
            name: name.into(),
            kind: CovariateKind::Continuous,
            values,
        }
    }

    pub fn binary(name: impl Into<String>, values: Array1<F>) -> Self {
        Self {
            name: name.into(),
            kind: CovariateKind::Binary,
            values,
        }
    }

    /// Positive-level indicator for binary covariates.
    pub fn indicator(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v > F::zero()).collect()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.values.len(),
                context: "covariate length",
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("covariate {} has non-finite values", self.name)));
        }
        if self.kind == CovariateKind::Binary {
            let ok = self
                .values
                .iter()
                .all(|&v| v == F::zero() || v == F::one() || v == -F::one());
            if !ok {
                return Err(Error::InvalidData(format!(
                    "binary covariate {} must take values in {{-1, 0, 1}}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// The confounders `Y_1..Y_{k-1}` and the binary label `Y_k` for one sample
/// set. Zero confounders is allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariateSet<F> {
    pub confounders: Vec<Covariate<F>>,
    pub label: Vec<bool>,
}

impl<F: Scalar> CovariateSet<F> {
    pub fn new(confounders: Vec<Covariate<F>>, label: Vec<bool>) -> Result<Self> {
        let n = label.len();
        if n == 0 {
            return Err(Error::InvalidData("empty label vector".into()));
        }
        for c in &confounders {
            c.validate(n)?;
        }
        Ok(Self { confounders, label })
    }

    pub fn n(&self) -> usize {
        self.label.len()
    }

    /// Number of factors including the label, i.e. confounders + 1.
    pub fn k(&self) -> usize {
        self.confounders.len() + 1
    }

    pub fn confounder(&self, name: &str) -> Option<&Covariate<F>> {
        self.confounders.iter().find(|c| c.name == name)
    }

    pub fn label_values(&self) -> Array1<F> {
        self.label.iter().map(|&b| if b { F::one() } else { F::zero() }).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            confounders: self
                .confounders
                .iter()
                .map(|c| Covariate {
                    name: c.name.clone(),
                    kind: c.kind,
                    values: c.values.select(Axis(0), indices),
                })
                .collect(),
            label: indices.iter().map(|&i| self.label[i]).collect(),
        }
    }

    pub fn cast<G: Scalar>(&self) -> CovariateSet<G> {
        CovariateSet {
            confounders: self
                .confounders
                .iter()
                .map(|c| Covariate {
                    name: c.name.clone(),
                    kind: c.kind,
                    values: c.values.mapv(|v| G::lit(v.to_f64_lossy())),
                })
                .collect(),
            label: self.label.clone(),
        }
    }
}

/// Observations paired with their covariates.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F> {
    pub x: DataMatrix<F>,
    pub covariates: CovariateSet<F>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(x: DataMatrix<F>, covariates: CovariateSet<F>) -> Result<Self> {
        if x.n() != covariates.n() {
            return Err(Error::DimensionMismatch {
                expected: x.n(),
                actual: covariates.n(),
                context: "covariate rows vs matrix rows",
            });
        }
        Ok(Self { x, covariates })
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn labels(&self) -> &[bool] {
        &self.covariates.label
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(indices),
            covariates: self.covariates.select(indices),
        }
    }

    /// Row-wise concatenation. Covariate names and kinds must agree.
    pub fn concat(parts: &[Self]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidData("nothing to concatenate".into()))?;
        let views: Vec<_> = parts.iter().map(|d| d.x.view()).collect();
        let x = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::InvalidData(e.to_string()))?;
        let mut confounders = Vec::with_capacity(first.covariates.confounders.len());
        for (j, c) in first.covariates.confounders.iter().enumerate() {
            let mut values = Vec::new();
            for part in parts {
                let other = part
                    .covariates
                    .confounders
                    .get(j)
                    .filter(|o| o.name == c.name && o.kind == c.kind)
                    .ok_or_else(|| Error::InvalidData("covariate layouts differ".into()))?;
                values.extend(other.values.iter().copied());
            }
            confounders.push(Covariate {
                name: c.name.clone(),
                kind: c.kind,
                values: Array1::from(values),
            });
        }
        let label = parts.iter().flat_map(|d| d.covariates.label.iter().copied()).collect();
        Dataset::new(DataMatrix::new(x)?, CovariateSet::new(confounders, label)?)
    }

    pub fn cast<G: Scalar>(&self) -> Dataset<G> {
        Dataset {
            x: self.x.cast(),
            covariates: self.covariates.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(DataMatrix::new(array![[1.0, f64::NAN]]).is_err());
        assert!(DataMatrix::<f64>::new(Array2::zeros((0, 3))).is_err());
        assert!(DataMatrix::new(array![[1.0f32]]).is_ok());
    }

    #[test]
    fn covariate_validation() {
        let bad = Covariate::binary("sex", array![0.0, 2.0]);
        assert!(CovariateSet::new(vec![bad], vec![true, false]).is_err());
        let short = Covariate::continuous("age", array![1.0]);
        assert!(CovariateSet::new(vec![short], vec![true, false]).is_err());
        let set = CovariateSet::<f64>::new(vec![], vec![true]).unwrap();
        assert_eq!(set.k(), 1);
    }

    #[test]
    fn select_keeps_rows_aligned() {
        let x = DataMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let cov = CovariateSet::new(
            vec![Covariate::continuous("c", array![10.0, 20.0, 30.0])],
            vec![false, true, false],
        )
        .unwrap();
        let ds = Dataset::new(x, cov).unwrap().select(&[2, 1]);
        assert_eq!(ds.x.values(), &array![[3.0], [2.0]]);
        assert_eq!(ds.covariates.confounders[0].values, array![30.0, 20.0]);
        assert_eq!(ds.labels(), &[false, true]);
    }
}
