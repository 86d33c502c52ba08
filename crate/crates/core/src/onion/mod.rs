//! Orthonormal confounder-direction removal.
//!
//! For each confounder `Y_i` in turn, find the unit direction `w` maximizing
//! `wᵀ X_dᵀ Y_i Y_iᵀ X_d w`, where `X_d` is the data with all previously found
//! directions projected out (`X_d ← X_d − X_d w wᵀ`). The normalized data is
//! `X_n = X − X W Wᵀ`, which needs no covariates and can be applied to unseen
//! samples.

mod persist;
mod power;

pub use persist::{load_basis, save_basis, BasisFile, SIGN_CONVENTION};
pub use power::{power_iteration, PowerOutcome};

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, norm};
use crate::scalar::Scalar;

/// `p × m` matrix with orthonormal columns spanning the removed subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis<F> {
    columns: Array2<F>,
}

impl<F: Scalar> OrthonormalBasis<F> {
    pub fn empty(p: usize) -> Self {
        Self {
            columns: Array2::zeros((p, 0)),
        }
    }

    /// Wraps `columns` after checking `WᵀW = I` to within `tol` per entry.
    pub fn from_columns(columns: Array2<F>, tol: F) -> Result<Self> {
        let (p, m) = columns.dim();
        if m > p {
            return Err(Error::InvalidData(format!("{m} basis vectors in R^{p}")));
        }
        let gram = columns.t().dot(&columns);
        for ((i, j), &g) in gram.indexed_iter() {
            let target = if i == j { F::one() } else { F::zero() };
            if (g - target).abs() > tol {
                return Err(Error::InvalidData(format!(
                    "basis is not orthonormal: (WᵀW)[{i},{j}] = {g}"
                )));
            }
        }
        Ok(Self { columns })
    }

    pub fn p(&self) -> usize {
        self.columns.nrows()
    }

    pub fn m(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &Array2<F> {
        &self.columns
    }

    pub fn column(&self, i: usize) -> Array1<F> {
        self.columns.column(i).to_owned()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnionConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for OnionConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
            seed: 0,
        }
    }
}

/// Per-direction diagnostics. All lists have one entry per basis column;
/// `skipped` lists confounders that carried no signal after deflation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OnionFitReport {
    pub iterations_per_confounder: Vec<usize>,
    pub converged: Vec<bool>,
    /// `(Y_iᵀ X w_i)²`, the maximized objective.
    pub captured_covariance: Vec<f64>,
    /// Confounder index that produced each column.
    pub confounder_index: Vec<usize>,
    #[serde(default)]
    pub skipped: Vec<usize>,
}

impl OnionFitReport {
    /// `Err(DegenerateConfounder)` for the first skipped confounder.
    pub fn ensure_complete(&self) -> Result<()> {
        match self.skipped.first() {
            Some(&index) => Err(Error::DegenerateConfounder { index }),
            None => Ok(()),
        }
    }
}

/// Fits one direction per confounder on centered `x`.
///
/// Confounders are centered before use. A confounder whose remaining
/// cross-covariance `‖X_dᵀ Y_i‖` falls below `tol · ‖X‖ · ‖Y_i‖` is skipped
/// and listed in `OnionFitReport::skipped`; no direction is invented for it.
pub fn onion_fit<F: Scalar>(
    x: &DataMatrix<F>,
    confounders: &[Array1<F>],
    config: &OnionConfig,
) -> Result<(OrthonormalBasis<F>, OnionFitReport)> {
    let (n, p) = (x.n(), x.p());
    if confounders.is_empty() || confounders.len() > p {
        return Err(Error::Config(format!(
            "need between 1 and {p} confounders, got {}",
            confounders.len()
        )));
    }
    if let Some(bad) = confounders.iter().find(|y| y.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: bad.len(),
            context: "confounder length",
        });
    }
    let means = x.values().mean_axis(Axis(0)).expect("non-empty");
    let scale = x.values().iter().fold(F::one(), |a, v| a.max(v.abs()));
    if means.iter().any(|m| m.abs() > F::lit(1e-6) * scale) {
        return Err(Error::InvalidData("onion_fit expects column-centered data".into()));
    }

    let tol = F::lit(config.tol);
    let x_norm = frobenius(x.values());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut deflated = x.values().clone();
    let mut columns: Vec<Array1<F>> = Vec::new();
    let mut report = OnionFitReport::default();

    for (index, raw) in confounders.iter().enumerate() {
        let y_mean = raw.mean().expect("non-empty");
        let y = raw.mapv(|v| v - y_mean);
        let cross = deflated.t().dot(&y);
        if norm(cross.view()) < tol * x_norm * norm(y.view()) || norm(cross.view()) == F::zero() {
            log::warn!("confounder {index} is degenerate after deflation; skipped");
            report.skipped.push(index);
            continue;
        }
        let xd = &deflated;
        let op = |u: &Array1<F>| {
            let s = y.dot(&xd.dot(u));
            xd.t().dot(&(&y * s))
        };
        let outcome = power_iteration(op, p, tol, config.max_iter, &mut rng)?;
        let mut w = outcome.vector;
        // Re-project against earlier columns to hold orthogonality at round-off level.
        for prev in &columns {
            let c = prev.dot(&w);
            w.scaled_add(-c, prev);
        }
        let wn = norm(w.view());
        w.mapv_inplace(|v| v / wn);
        let latent = deflated.dot(&w);
        let mut cov = y.dot(&latent);
        if cov < F::zero() {
            w.mapv_inplace(|v| -v);
            cov = -cov;
        }
        // X_d ← X_d − (X_d w) wᵀ
        let xw = deflated.dot(&w);
        for (mut row, &s) in deflated.axis_iter_mut(Axis(0)).zip(xw.iter()) {
            row.scaled_add(-s, &w);
        }
        report.iterations_per_confounder.push(outcome.iterations);
        report.converged.push(outcome.converged);
        report.captured_covariance.push((cov * cov).to_f64_lossy());
        report.confounder_index.push(index);
        columns.push(w);
    }

    let mut basis = Array2::zeros((p, columns.len()));
    for (j, w) in columns.iter().enumerate() {
        basis.column_mut(j).assign(w);
    }
    Ok((OrthonormalBasis { columns: basis }, report))
}

/// `X_n = X − X W Wᵀ`. Consumes no covariates.
pub fn onion_transform<F: Scalar>(x: &DataMatrix<F>, basis: &OrthonormalBasis<F>) -> Result<DataMatrix<F>> {
    Ok(DataMatrix::from_trusted(x.values() - &confounded_part(x, basis)?))
}

/// `X_c = X W Wᵀ`, the part removed by [`onion_transform`].
pub fn confounded_part<F: Scalar>(x: &DataMatrix<F>, basis: &OrthonormalBasis<F>) -> Result<Array2<F>> {
    if x.p() != basis.p() {
        return Err(Error::DimensionMismatch {
            expected: basis.p(),
            actual: x.p(),
            context: "basis feature count",
        });
    }
    let w = basis.columns();
    Ok(x.values().dot(w).dot(&w.t()))
}
