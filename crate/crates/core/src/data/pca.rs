use ndarray::{Array1, Array2, Axis};

use super::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::scalar::Scalar;

/// Requested more components than the training data supports; the outcome
/// carries only the `available` ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankDeficient {
    pub requested: usize,
    pub available: usize,
}

#[derive(Clone, Debug)]
pub struct PcaOutcome<F> {
    pub train: DataMatrix<F>,
    pub test: DataMatrix<F>,
    /// `p × c` loading matrix, columns ordered by decreasing variance.
    pub components: Array2<F>,
    pub mean: Array1<F>,
    /// Variance (divisor `n - 1`) captured by each component.
    pub explained_variance: Array1<F>,
    pub rank_warning: Option<RankDeficient>,
}

/// Projects train and test data onto the leading principal axes of the
/// centered training data.
///
/// Uses whichever of the `p × p` covariance or the `n × n` Gram matrix is
/// smaller. Each component's largest-magnitude loading is made positive.
pub fn pca_reduce<F: Scalar>(
    x_train: &DataMatrix<F>,
    x_test: &DataMatrix<F>,
    components: usize,
) -> Result<PcaOutcome<F>> {
    let (n, p) = (x_train.n(), x_train.p());
    if x_test.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: x_test.p(),
            context: "pca test feature count",
        });
    }
    if components == 0 || components > n.min(p) {
        return Err(Error::Config(format!(
            "pca components must be in 1..={}, got {components}",
            n.min(p)
        )));
    }
    let mean = x_train.values().mean_axis(Axis(0)).expect("non-empty");
    let centered = x_train.values() - &mean;
    let dof = F::from_usize_lossy(n.saturating_sub(1).max(1));

    let (eigvals, loadings) = if p <= n {
        let cov = centered.t().dot(&centered) / dof;
        symmetric_eigen(&cov)
    } else {
        let gram = centered.dot(&centered.t()) / dof;
        let (vals, u) = symmetric_eigen(&gram);
        // v_i = Xcᵀ u_i / sqrt(dof * λ_i); columns with λ_i ~ 0 are dropped below.
        let mut v = centered.t().dot(&u);
        for (i, mut col) in v.axis_iter_mut(Axis(1)).enumerate() {
            let lam = vals[i];
            if lam > F::zero() {
                let s = (dof * lam).sqrt();
                col.mapv_inplace(|x| x / s);
            }
        }
        (vals, v)
    };

    let top = eigvals[0].max(F::zero());
    let floor = top * F::from_usize_lossy(n.max(p)) * F::epsilon() * F::lit(10.0);
    let available = eigvals.iter().take_while(|&&l| l > floor).count();
    let kept = components.min(available.max(1));
    let rank_warning = (kept < components).then_some(RankDeficient {
        requested: components,
        available,
    });

    let mut basis = loadings.slice(ndarray::s![.., ..kept]).to_owned();
    for mut col in basis.axis_iter_mut(Axis(1)) {
        let norm = col.dot(&col).sqrt();
        if norm > F::zero() {
            col.mapv_inplace(|x| x / norm);
        }
        let pivot = col
            .iter()
            .copied()
            .fold(F::zero(), |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < F::zero() {
            col.mapv_inplace(|x| -x);
        }
    }

    let train = centered.dot(&basis);
    let test = (x_test.values() - &mean).dot(&basis);
    Ok(PcaOutcome {
        train: DataMatrix::new(train)?,
        test: DataMatrix::new(test)?,
        components: basis,
        mean,
        explained_variance: eigvals.slice(ndarray::s![..kept]).to_owned(),
        rank_warning,
    })
}
