use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use super::DataMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Scales every row to sum to `depth_constant`.
pub fn depth_normalize<F: Scalar>(x: &DataMatrix<F>, depth_constant: F) -> Result<DataMatrix<F>> {
    if !(depth_constant > F::zero()) {
        return Err(Error::Config("depth constant must be positive".into()));
    }
    let mut out = x.values().clone();
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let total = row.sum();
        if total == F::zero() {
            return Err(Error::ZeroRowSum { row: i });
        }
        let scale = depth_constant / total;
        row.mapv_inplace(|v| v * scale);
    }
    DataMatrix::new(out)
}

/// Quantile by linear interpolation between order statistics of `sorted`
/// (ascending). Position `h = (len - 1) * q`.
pub fn linear_quantile<F: Scalar>(sorted: &[F], q: f64) -> F {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = F::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Subtracts column means. Returns the centered matrix and the means.
pub fn center_columns<F: Scalar>(x: &DataMatrix<F>) -> (DataMatrix<F>, Array1<F>) {
    let mean = x
        .values()
        .mean_axis(Axis(0))
        .expect("matrix has at least one row");
    let centered = x.values() - &mean;
    (DataMatrix::from_trusted(centered), mean)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessOptions {
    /// Per-sample depth normalization constant; `None` skips the step.
    pub depth_constant: Option<f64>,
    /// Upper clipping quantile fitted per feature; `None` disables clipping.
    pub clip_quantile: Option<f64>,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            depth_constant: None,
            clip_quantile: Some(0.99),
        }
    }
}

impl PreprocessOptions {
    /// Count data: depth normalization to 1e6 then 99th-percentile clipping.
    pub fn counts() -> Self {
        Self {
            depth_constant: Some(1e6),
            clip_quantile: Some(0.99),
        }
    }

    /// Standardization only.
    pub fn standardize_only() -> Self {
        Self {
            depth_constant: None,
            clip_quantile: None,
        }
    }
}

/// Per-feature statistics learned from a training matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessorState<F> {
    pub mean: Array1<F>,
    /// Stored standard deviation; flagged features hold 1.
    pub sd: Array1<F>,
    pub clip_threshold: Array1<F>,
    pub zero_sd: Vec<bool>,
    pub depth_constant: Option<F>,
}

/// Fits clipping thresholds (99th percentile) and mean/sd on the clipped
/// training matrix. No depth normalization.
pub fn fit_preprocessor<F: Scalar>(x_train: &DataMatrix<F>) -> Result<PreprocessorState<F>> {
    PreprocessorState::fit(x_train, &PreprocessOptions::default())
}

impl<F: Scalar> PreprocessorState<F> {
    pub fn fit(x_train: &DataMatrix<F>, options: &PreprocessOptions) -> Result<Self> {
        if x_train.n() < 2 {
            return Err(Error::InvalidData("preprocessor needs at least two training rows".into()));
        }
        let depth_constant = options.depth_constant.map(F::lit);
        let normalized;
        let x = match depth_constant {
            Some(c) => {
                normalized = depth_normalize(x_train, c)?;
                &normalized
            }
            None => x_train,
        };
        let p = x.p();
        let n = F::from_usize_lossy(x.n());
        let mut mean = Array1::zeros(p);
        let mut sd = Array1::ones(p);
        let mut clip_threshold = Array1::from_elem(p, F::infinity());
        let mut zero_sd = vec![false; p];
        for (j, column) in x.values().axis_iter(Axis(1)).enumerate() {
            let mut col: Vec<F> = column.to_vec();
            if let Some(q) = options.clip_quantile {
                let mut sorted = col.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                let threshold = linear_quantile(&sorted, q);
                clip_threshold[j] = threshold;
                for v in &mut col {
                    *v = v.min(threshold);
                }
            }
            let m = col.iter().copied().sum::<F>() / n;
            let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<F>() / n;
            mean[j] = m;
            let s = var.sqrt();
            // Relative floor so round-off on a constant column still counts as constant.
            if s <= m.abs() * F::epsilon() * F::lit(8.0) || s == F::zero() {
                zero_sd[j] = true;
            } else {
                sd[j] = s;
            }
        }
        Ok(Self {
            mean,
            sd,
            clip_threshold,
            zero_sd,
            depth_constant,
        })
    }

    pub fn p(&self) -> usize {
        self.mean.len()
    }

    /// Depth-normalizes (if fitted with a constant), clips to the stored
    /// thresholds, then standardizes. Flagged zero-sd features map to 0.
    pub fn apply(&self, x: &DataMatrix<F>) -> Result<DataMatrix<F>> {
        if x.p() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                actual: x.p(),
                context: "preprocessor feature count",
            });
        }
        let normalized;
        let x = match self.depth_constant {
            Some(c) => {
                normalized = depth_normalize(x, c)?;
                &normalized
            }
            None => x,
        };
        let mut out = x.values().clone();
        for (j, mut column) in out.axis_iter_mut(Axis(1)).enumerate() {
            if self.zero_sd[j] {
                column.fill(F::zero());
                continue;
            }
            let (m, s, t) = (self.mean[j], self.sd[j], self.clip_threshold[j]);
            column.mapv_inplace(|v| (v.min(t) - m) / s);
        }
        DataMatrix::new(out)
    }
}

/// Serialized preprocessor; `None` thresholds mean no clipping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessorFile {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub clip_threshold: Vec<Option<f64>>,
    pub zero_sd: Vec<bool>,
    pub depth_constant: Option<f64>,
}

impl<F: Scalar> PreprocessorState<F> {
    pub fn to_file(&self) -> PreprocessorFile {
        let f = |a: &Array1<F>| a.iter().map(|v| v.to_f64_lossy()).collect();
        PreprocessorFile {
            mean: f(&self.mean),
            sd: f(&self.sd),
            clip_threshold: self
                .clip_threshold
                .iter()
                .map(|t| t.is_finite().then(|| t.to_f64_lossy()))
                .collect(),
            zero_sd: self.zero_sd.clone(),
            depth_constant: self.depth_constant.map(|c| c.to_f64_lossy()),
        }
    }

    pub fn from_file(file: &PreprocessorFile) -> Result<Self> {
        let p = file.mean.len();
        for (len, context) in [
            (file.sd.len(), "preprocessor sd"),
            (file.clip_threshold.len(), "preprocessor clip thresholds"),
            (file.zero_sd.len(), "preprocessor zero-sd flags"),
        ] {
            if len != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: len,
                    context,
                });
            }
        }
        if file.sd.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidData("preprocessor sd must be positive".into()));
        }
        Ok(Self {
            mean: file.mean.iter().map(|&v| F::lit(v)).collect(),
            sd: file.sd.iter().map(|&v| F::lit(v)).collect(),
            clip_threshold: file
                .clip_threshold
                .iter()
                .map(|t| t.map_or(F::infinity(), F::lit))
                .collect(),
            zero_sd: file.zero_sd.clone(),
            depth_constant: file.depth_constant.map(F::lit),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn dm(rows: &[Vec<f64>]) -> DataMatrix<f64> {
        DataMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn depth_normalize_examples() {
        let out = depth_normalize(&dm(&[vec![1.0, 1.0, 2.0]]), 4.0).unwrap();
        assert_eq!(out.values(), &array![[1.0, 1.0, 2.0]]);
        let out = depth_normalize(&dm(&[vec![2.0, 2.0, 4.0]]), 4.0).unwrap();
        assert_eq!(out.values(), &array![[1.0, 1.0, 2.0]]);
        let out = depth_normalize(&dm(&[vec![1.0, 3.0], vec![2.0, 2.0], vec![0.0, 4.0]]), 8.0).unwrap();
        assert_eq!(out.values(), &array![[2.0, 6.0], [4.0, 4.0], [0.0, 8.0]]);
    }

    #[test]
    fn depth_normalize_zero_row() {
        let err = depth_normalize(&dm(&[vec![1.0, 1.0], vec![0.0, 0.0]]), 1.0).unwrap_err();
        assert!(matches!(err, Error::ZeroRowSum { row: 1 }));
    }

    #[test]
    fn quantile_of_one_to_hundred() {
        let col: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_abs_diff_eq!(linear_quantile(&col, 0.99), 99.01, epsilon = 1e-12);
        let x = DataMatrix::new(Array2::from_shape_vec((100, 1), col).unwrap()).unwrap();
        let state = fit_preprocessor(&x).unwrap();
        assert_abs_diff_eq!(state.clip_threshold[0], 99.01, epsilon = 1e-12);
    }

    #[test]
    fn constant_column_is_flagged() {
        let x = dm(&[vec![3.0, 1.0], vec![3.0, 2.0], vec![3.0, 4.0]]);
        let state = fit_preprocessor(&x).unwrap();
        assert_eq!(state.mean[0], 3.0);
        assert!(state.zero_sd[0]);
        assert!(!state.zero_sd[1]);
        let out = state.apply(&x).unwrap();
        assert!(out.values().column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_state_on_single_value() {
        let state = PreprocessorState {
            mean: array![2.0],
            sd: array![2.0],
            clip_threshold: array![10.0],
            zero_sd: vec![false],
            depth_constant: None,
        };
        let out = state.apply(&dm(&[vec![6.0], vec![50.0]])).unwrap();
        assert_eq!(out.values()[[0, 0]], 2.0);
        // clipped to 10 first
        assert_eq!(out.values()[[1, 0]], 4.0);
    }

    #[test]
    fn dimension_mismatch_on_apply() {
        let state = fit_preprocessor(&dm(&[vec![1.0, 2.0], vec![2.0, 3.0]])).unwrap();
        assert!(matches!(
            state.apply(&dm(&[vec![1.0]])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_row_fit_rejected() {
        assert!(fit_preprocessor(&dm(&[vec![1.0, 2.0]])).is_err());
    }

    #[test]
    fn center_examples() {
        let (c, m) = center_columns(&dm(&[vec![1.0], vec![3.0]]));
        assert_eq!(c.values(), &array![[-1.0], [1.0]]);
        assert_eq!(m, array![2.0]);
        let (again, m2) = center_columns(&c);
        assert_eq!(again.values(), c.values());
        assert_eq!(m2, array![0.0]);
    }

    #[test]
    fn depth_constant_does_not_change_standardized_output() {
        let x = dm(&[
            vec![10.0, 3.0, 7.0],
            vec![4.0, 9.0, 1.0],
            vec![6.0, 6.0, 6.0],
            vec![1.0, 2.0, 30.0],
            vec![8.0, 8.0, 2.0],
        ]);
        let fit = |c| {
            let opts = PreprocessOptions {
                depth_constant: Some(c),
                clip_quantile: Some(0.99),
            };
            PreprocessorState::fit(&x, &opts).unwrap().apply(&x).unwrap()
        };
        let a = fit(1e6);
        let b = fit(17.0);
        for (u, v) in a.values().iter().zip(b.values()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-9);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let x = DataMatrix::<f32>::from_rows(&[vec![1.0, 5.0], vec![3.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let state = PreprocessorState::fit(&x, &PreprocessOptions::standardize_only()).unwrap();
        let out = state.apply(&x).unwrap();
        let means = out.values().mean_axis(Axis(0)).unwrap();
        assert!(means.iter().all(|m| m.abs() < 1e-6));
    }

    fn matrix_strategy() -> impl Strategy<Value = Array2<f64>> {
        (2usize..8, 1usize..5).prop_flat_map(|(n, p)| {
            proptest::collection::vec(0.5f64..100.0, n * p)
                .prop_map(move |v| Array2::from_shape_vec((n, p), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn depth_normalize_is_idempotent(values in matrix_strategy(), c in 1.0f64..1e6) {
            let x = DataMatrix::new(values).unwrap();
            let once = depth_normalize(&x, c).unwrap();
            let twice = depth_normalize(&once, c).unwrap();
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            for row in once.values().rows() {
                prop_assert!((row.sum() - c).abs() <= 1e-9 * c);
            }
        }

        #[test]
        fn standardized_training_means_vanish(values in matrix_strategy()) {
            let x = DataMatrix::new(values).unwrap();
            let state = fit_preprocessor(&x).unwrap();
            let out = state.apply(&x).unwrap();
            for (j, col) in out.values().axis_iter(Axis(1)).enumerate() {
                if !state.zero_sd[j] {
                    prop_assert!(col.mean().unwrap().abs() < 1e-6);
                }
            }
        }

        #[test]
        fn centering_round_trips(values in matrix_strategy()) {
            let x = DataMatrix::new(values).unwrap();
            let (c, m) = center_columns(&x);
            let restored = c.values() + &m;
            for (a, b) in restored.iter().zip(x.values()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            for col in c.values().axis_iter(Axis(1)) {
                prop_assert!(col.mean().unwrap().abs() < 1e-9);
            }
            let (again, _) = center_columns(&c);
            for (a, b) in again.values().iter().zip(c.values()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
