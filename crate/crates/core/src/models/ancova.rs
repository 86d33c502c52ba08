use ndarray::{Array2, Axis};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{Covariate, DataMatrix};
use crate::error::{Error, Result};
use crate::linalg::orthonormal_columns;
use crate::scalar::Scalar;

/// Per-feature p-values for association with the label after regressing out
/// an intercept and the confounders.
///
/// Residuals are compared between label groups with a pooled two-sample
/// t-test (`n − 2` degrees of freedom). A feature the confounders explain
/// completely gets p = 1.
pub fn ancova_p_values<F: Scalar>(x: &DataMatrix<F>, labels: &[bool], confounders: &[Covariate<F>]) -> Result<Vec<f64>> {
    let n = x.n();
    if labels.len() != n || confounders.iter().any(|c| c.values.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
            context: "ancova inputs",
        });
    }
    if n <= confounders.len() + 2 {
        return Err(Error::InvalidData(format!(
            "ancova needs more than {} samples",
            confounders.len() + 2
        )));
    }
    let n1 = labels.iter().filter(|&&b| b).count();
    let n0 = n - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::SingleClass);
    }

    let mut design = Array2::<f64>::ones((n, confounders.len() + 1));
    for (j, c) in confounders.iter().enumerate() {
        for (i, v) in c.values.iter().enumerate() {
            design[[i, j + 1]] = v.to_f64_lossy();
        }
    }
    let q = orthonormal_columns(&design)?;
    let df = (n - 2) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");

    let values = x.values().mapv(|v| v.to_f64_lossy());
    let mut p_values = Vec::with_capacity(x.p());
    for column in values.axis_iter(Axis(1)) {
        let fitted = q.dot(&q.t().dot(&column));
        let resid = &column - &fitted;
        let scale = column.dot(&column).sqrt();
        let rnorm = resid.dot(&resid).sqrt();
        if scale == 0.0 || rnorm <= 1e-10 * scale {
            p_values.push(1.0);
            continue;
        }
        let (mut s1, mut s0) = (0.0, 0.0);
        for (r, &b) in resid.iter().zip(labels) {
            if b {
                s1 += r;
            } else {
                s0 += r;
            }
        }
        let (m1, m0) = (s1 / n1 as f64, s0 / n0 as f64);
        let ss: f64 = resid
            .iter()
            .zip(labels)
            .map(|(r, &b)| {
                let d = r - if b { m1 } else { m0 };
                d * d
            })
            .sum();
        let pooled = ss / df;
        let se = (pooled * (1.0 / n1 as f64 + 1.0 / n0 as f64)).sqrt();
        let p = if se == 0.0 {
            if m1 == m0 {
                1.0
            } else {
                0.0
            }
        } else {
            let t = (m1 - m0) / se;
            2.0 * t_dist.cdf(-t.abs())
        };
        p_values.push(p);
    }
    Ok(p_values)
}

/// Indices of features whose confounder-adjusted association with the label
/// has p-value below `alpha_level`.
pub fn ancova_filter<F: Scalar>(
    x: &DataMatrix<F>,
    labels: &[bool],
    confounders: &[Covariate<F>],
    alpha_level: f64,
) -> Result<Vec<usize>> {
    Ok(ancova_p_values(x, labels, confounders)?
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p < alpha_level)
        .map(|(j, _)| j)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn setup(n: usize, seed: u64) -> (Vec<bool>, Covariate<f64>, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let conf: Array1<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        (labels, Covariate::continuous("c", conf), rng)
    }

    #[test]
    fn confounder_copy_excluded_label_feature_kept() {
        let n = 60;
        let (labels, conf, mut rng) = setup(n, 4);
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            if j == 0 {
                conf.values[i]
            } else {
                2.0 * (labels[i] as u8 as f64) + 0.01 * rng.sample::<f64, _>(StandardNormal)
            }
        });
        let x = DataMatrix::new(x).unwrap();
        let p = ancova_p_values(&x, &labels, std::slice::from_ref(&conf)).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] < 1e-10);
        assert_eq!(ancova_filter(&x, &labels, &[conf], 0.05).unwrap(), vec![1]);
    }

    #[test]
    fn rank_deficient_design() {
        let n = 10;
        let (labels, conf, _) = setup(n, 1);
        let twice = Covariate::continuous("c2", conf.values.mapv(|v| 2.0 * v));
        let x = DataMatrix::new(Array2::from_shape_fn((n, 1), |(i, _)| i as f64)).unwrap();
        assert!(matches!(ancova_p_values(&x, &labels, &[conf, twice]), Err(Error::DegenerateDesign)));
    }

    #[test]
    fn too_few_samples() {
        let labels = vec![true, false, true];
        let conf = Covariate::continuous("c", Array1::from(vec![0.1, 0.2, 0.3]));
        let x = DataMatrix::new(Array2::from_elem((3, 1), 1.0)).unwrap();
        assert!(ancova_p_values(&x, &labels, &[conf]).is_err());
    }
}
