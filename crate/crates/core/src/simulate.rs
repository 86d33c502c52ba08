//! Confounded data from an extended inter-battery factor model:
//!
//! ```text
//! Z_i ~ N(0, I_d)            W_x_i (d×p), W_y_i (d) ~ N(0, 1)     α ~ Dir(s)
//! X   = Σ_i Z_i W_x_i + ε_X,                      ε_X ~ N(0, σ² I_p)
//! Y_i = Z_i W_y_i + ε_i                     (i < k)
//! Y_k = 1{ Σ_{i<k} α_i Y_i + α_k Z_k W_y_k + ε_k > 0 }
//! ```
//!
//! Training sets are then skewed so that the confounder `Y_1` separates the
//! classes in the opposite direction to the population.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Covariate, CovariateSet, DataMatrix, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Latent dimension.
    pub d: usize,
    pub p: usize,
    pub sigma: f64,
    /// Factor count including the label factor.
    pub k: usize,
    /// Dirichlet concentration, one entry per factor.
    pub concentration: Vec<f64>,
    /// Requested post-filter training size.
    pub n: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            d: 20,
            p: 300,
            sigma: 2.0,
            k: 2,
            concentration: vec![40.0, 50.0],
            n: 6000,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.p == 0 || self.k == 0 || self.n == 0 {
            return Err(Error::Config("d, p, k and n must be at least 1".into()));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config("sigma must be positive".into()));
        }
        if self.concentration.len() != self.k {
            return Err(Error::Config(format!(
                "concentration has {} entries for k = {}",
                self.concentration.len(),
                self.k
            )));
        }
        if self.concentration.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Config("concentration entries must be positive".into()));
        }
        Ok(())
    }
}

/// Parameters drawn once per simulated world.
#[derive(Clone, Debug, PartialEq)]
pub struct SimWorld<F> {
    pub wx: Vec<Array2<F>>,
    pub wy: Vec<Array1<F>>,
    pub alpha: Array1<F>,
}

fn normal<F: Scalar, R: Rng + ?Sized>(rng: &mut R) -> F {
    F::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Dirichlet draw via normalized independent Gamma(s_i, 1) variates.
pub fn dirichlet<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = concentration
        .iter()
        .map(|&s| Gamma::new(s, 1.0).expect("positive shape").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|g| g / total).collect()
}

pub fn sim_world<F: Scalar>(config: &SimConfig) -> Result<SimWorld<F>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let wx = (0..config.k)
        .map(|_| Array2::from_shape_fn((config.d, config.p), |_| normal(&mut rng)))
        .collect();
    let wy = (0..config.k)
        .map(|_| Array1::from_shape_fn(config.d, |_| normal(&mut rng)))
        .collect();
    let alpha = dirichlet(&config.concentration, &mut rng)
        .into_iter()
        .map(F::lit)
        .collect();
    Ok(SimWorld { wx, wy, alpha })
}

/// A draw together with its latent factors `Z_1..Z_k` (each `n × d`).
#[derive(Clone, Debug)]
pub struct SimDraw<F> {
    pub dataset: Dataset<F>,
    pub latents: Vec<Array2<F>>,
}

/// `n` fresh samples from `world`. Confounders are named `Y1..Y{k-1}` and
/// are continuous.
pub fn sim_draw<F: Scalar, R: Rng + ?Sized>(world: &SimWorld<F>, config: &SimConfig, n: usize, rng: &mut R) -> Result<Dataset<F>> {
    Ok(sim_draw_with_latents(world, config, n, rng)?.dataset)
}

pub fn sim_draw_with_latents<F: Scalar, R: Rng + ?Sized>(
    world: &SimWorld<F>,
    config: &SimConfig,
    n: usize,
    rng: &mut R,
) -> Result<SimDraw<F>> {
    if n == 0 {
        return Err(Error::Config("cannot draw zero samples".into()));
    }
    let (k, d, p) = (world.wx.len(), config.d, config.p);
    if k != config.k || world.wx.iter().any(|w| w.dim() != (d, p)) {
        return Err(Error::Config("world does not match config".into()));
    }
    let sigma = F::lit(config.sigma);
    let latents: Vec<Array2<F>> = (0..k)
        .map(|_| Array2::from_shape_fn((n, d), |_| normal(rng)))
        .collect();
    let mut x = Array2::from_shape_fn((n, p), |_| sigma * normal::<F, _>(rng));
    for (z, w) in latents.iter().zip(&world.wx) {
        x += &z.dot(w);
    }
    let mut confounders = Vec::with_capacity(k - 1);
    let mut score = Array1::<F>::zeros(n);
    for i in 0..k - 1 {
        let noise = Array1::from_shape_fn(n, |_| sigma * normal::<F, _>(rng));
        let y = latents[i].dot(&world.wy[i]) + noise;
        score.scaled_add(world.alpha[i], &y);
        confounders.push(Covariate::continuous(format!("Y{}", i + 1), y));
    }
    let noise = Array1::from_shape_fn(n, |_| sigma * normal::<F, _>(rng));
    score.scaled_add(world.alpha[k - 1], &latents[k - 1].dot(&world.wy[k - 1]));
    score += &noise;
    let label = score.iter().map(|&s| s > F::zero()).collect();
    let dataset = Dataset::new(DataMatrix::new(x)?, CovariateSet::new(confounders, label)?)?;
    Ok(SimDraw { dataset, latents })
}

/// Training-set admission rule: `(Y_1 < 0 ∧ Y_k = 1) ∨ (Y_1 ≥ 0 ∧ Y_k = 0)`.
pub fn admitted_to_training<F: Scalar>(y1: F, label: bool) -> bool {
    (y1 < F::zero()) == label
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestBalance {
    /// Test samples keep the generative distribution.
    #[default]
    Unfiltered,
    /// Each (sign of `Y_1`, label) quadrant is subsampled to the smallest one.
    Quadrants,
}

fn single_confounder<F: Scalar>(ds: &Dataset<F>) -> Result<&Covariate<F>> {
    match ds.covariates.confounders.as_slice() {
        [y1] => Ok(y1),
        other => Err(Error::Config(format!(
            "confounding filter needs exactly one confounder, found {}",
            other.len()
        ))),
    }
}

/// Indices of `ds` that pass the training admission rule.
pub fn training_filter<F: Scalar>(ds: &Dataset<F>) -> Result<Vec<usize>> {
    let y1 = single_confounder(ds)?;
    Ok((0..ds.n())
        .filter(|&i| admitted_to_training(y1.values[i], ds.covariates.label[i]))
        .collect())
}

/// Equal-sized (sign of `Y_1`, label) quadrants, sampled without replacement.
pub fn balance_quadrants<F: Scalar, R: Rng + ?Sized>(ds: &Dataset<F>, rng: &mut R) -> Result<Vec<usize>> {
    use rand::seq::SliceRandom;
    let y1 = single_confounder(ds)?;
    let mut cells: [Vec<usize>; 4] = Default::default();
    for i in 0..ds.n() {
        let cell = 2 * usize::from(y1.values[i] >= F::zero()) + usize::from(ds.covariates.label[i]);
        cells[cell].push(i);
    }
    let m = cells.iter().map(Vec::len).min().unwrap_or(0);
    let mut keep = Vec::with_capacity(4 * m);
    for cell in &mut cells {
        cell.shuffle(rng);
        keep.extend_from_slice(&cell[..m]);
    }
    keep.sort_unstable();
    Ok(keep)
}

/// Partitions into train/test candidates, then keeps only admitted training
/// samples. The test side is never filtered (unless quadrant balancing is
/// requested).
pub fn confound_split<F: Scalar, R: Rng + ?Sized>(
    ds: &Dataset<F>,
    test_fraction: f64,
    balance: TestBalance,
    rng: &mut R,
) -> Result<(Dataset<F>, Dataset<F>)> {
    use rand::seq::SliceRandom;
    if !(0.0 < test_fraction && test_fraction < 1.0) {
        return Err(Error::Config("test_fraction must be in (0, 1)".into()));
    }
    single_confounder(ds)?;
    let mut order: Vec<usize> = (0..ds.n()).collect();
    order.shuffle(rng);
    let n_test = ((test_fraction * ds.n() as f64).round() as usize).clamp(1, ds.n());
    let mut test_idx = order[..n_test].to_vec();
    let mut train_idx = order[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    if train_idx.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let candidates = ds.select(&train_idx);
    let kept = training_filter(&candidates)?;
    if kept.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let train = candidates.select(&kept);
    let mut test = ds.select(&test_idx);
    if balance == TestBalance::Quadrants {
        let keep = balance_quadrants(&test, rng)?;
        if keep.is_empty() {
            return Err(Error::InvalidData("a test quadrant is empty".into()));
        }
        test = test.select(&keep);
    }
    Ok((train, test))
}

/// Fresh samples until exactly `n` pass the training admission rule; only
/// admitted samples are returned.
pub fn draw_admitted<F: Scalar, R: Rng + ?Sized>(world: &SimWorld<F>, config: &SimConfig, n: usize, rng: &mut R) -> Result<Dataset<F>> {
    if config.k != 2 {
        return Err(Error::Config("confounded simulation needs k = 2".into()));
    }
    let batch = n.max(1024);
    let mut parts = Vec::new();
    let mut have = 0;
    while have < n {
        let ds = sim_draw(world, config, batch, rng)?;
        let mut keep = training_filter(&ds)?;
        keep.truncate(n - have);
        have += keep.len();
        if !keep.is_empty() {
            parts.push(ds.select(&keep));
        }
    }
    Dataset::concat(&parts)
}

/// Draws until exactly `config.n` admitted training samples exist. Each draw
/// goes to the test side with probability `test_fraction`, otherwise it is a
/// training candidate.
pub fn simulate_confounded<F: Scalar, R: Rng + ?Sized>(
    world: &SimWorld<F>,
    config: &SimConfig,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(Dataset<F>, Dataset<F>)> {
    if config.k != 2 {
        return Err(Error::Config("confounded simulation needs k = 2".into()));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Config("test_fraction must be in [0, 1)".into()));
    }
    let batch = config.n.max(1024);
    let mut train_parts = Vec::new();
    let mut test_parts = Vec::new();
    let mut have = 0;
    while have < config.n {
        let ds = sim_draw(world, config, batch, rng)?;
        let y1 = &ds.covariates.confounders[0].values;
        let mut train_idx = Vec::new();
        let mut test_idx = Vec::new();
        for i in 0..ds.n() {
            if rng.gen::<f64>() < test_fraction {
                test_idx.push(i);
            } else if admitted_to_training(y1[i], ds.covariates.label[i]) {
                train_idx.push(i);
                have += 1;
                if have == config.n {
                    break;
                }
            }
        }
        if !train_idx.is_empty() {
            train_parts.push(ds.select(&train_idx));
        }
        if !test_idx.is_empty() {
            test_parts.push(ds.select(&test_idx));
        }
    }
    let train = Dataset::concat(&train_parts)?;
    if test_parts.is_empty() {
        return Err(Error::InvalidData("no test samples drawn; raise test_fraction".into()));
    }
    Ok((train, Dataset::concat(&test_parts)?))
}

/// Synthetic stand-in for a clinical count cohort with a sex-like binary
/// confounder. The population has no sex/label association; biased
/// subsampling creates one.
///
/// Feature layout: `chrX`, `chrY`, then `label_features` columns whose
/// log-mean shifts with the label, then `noise_features` columns. The two
/// chromosome proxies are deterministic functions of sex. All values are
/// positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub n: usize,
    /// Fraction of cancer samples.
    pub prevalence: f64,
    pub label_features: usize,
    pub noise_features: usize,
    /// Log-scale shift between classes for label features.
    pub effect: f64,
    /// Log-scale noise sd.
    pub noise: f64,
    /// Log-scale noise sd of the chromosome proxies; 0 makes them exact
    /// functions of sex.
    pub proxy_noise: f64,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n: 734,
            prevalence: 520.0 / 734.0,
            label_features: 20,
            noise_features: 30,
            effect: 0.25,
            noise: 0.5,
            proxy_noise: 0.0,
            seed: 0,
        }
    }
}

pub const SEX_COLUMN: &str = "sex";

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.label_features == 0 {
            return Err(Error::Config("cohort needs n >= 2 and at least one label feature".into()));
        }
        if !(0.0 < self.prevalence && self.prevalence < 1.0) {
            return Err(Error::Config("prevalence must be in (0, 1)".into()));
        }
        if !(self.noise > 0.0) || !(self.proxy_noise >= 0.0) || !self.effect.is_finite() {
            return Err(Error::Config("noise must be positive, proxy_noise non-negative and effect finite".into()));
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = vec!["chrX".to_string(), "chrY".to_string()];
        names.extend((0..self.label_features).map(|j| format!("label_{j}")));
        names.extend((0..self.noise_features).map(|j| format!("noise_{j}")));
        names
    }
}

/// Covariate `sex` is binary, 1 for male. Label `true` is cancer.
pub fn sex_like_cohort<F: Scalar>(config: &CohortConfig) -> Result<Dataset<F>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let p = 2 + config.label_features + config.noise_features;
    let base: Vec<f64> = (0..p).map(|_| rng.gen_range(2.0..6.0)).collect();
    let direction: Vec<f64> = (0..config.label_features)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut x = Array2::<F>::zeros((config.n, p));
    let mut sex = Array1::<F>::zeros(config.n);
    let mut label = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let male = rng.gen::<bool>();
        let cancer = rng.gen::<f64>() < config.prevalence;
        sex[i] = if male { F::one() } else { F::zero() };
        label.push(cancer);
        for (j, ratio) in [(0, if male { 1.0 } else { 2.0 }), (1, if male { 1.0 } else { 1e-3 })] {
            let eps: f64 = if config.proxy_noise > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            x[[i, j]] = F::lit((base[j] + config.proxy_noise * eps).exp() * ratio);
        }
        let shift = if cancer { 0.5 } else { -0.5 } * config.effect;
        for j in 2..p {
            let mean = base[j] + direction.get(j - 2).map_or(0.0, |d| d * shift);
            let eps: f64 = rng.sample(StandardNormal);
            x[[i, j]] = F::lit((mean + config.noise * eps).exp());
        }
    }
    Dataset::new(
        DataMatrix::new(x)?,
        CovariateSet::new(vec![Covariate::binary(SEX_COLUMN, sex)], label)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        SimConfig::default().validate().unwrap();
        let bad = SimConfig {
            concentration: vec![1.0],
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            sigma: 0.0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn admission_rule() {
        assert!(admitted_to_training(-0.1, true));
        assert!(admitted_to_training(0.0, false));
        assert!(!admitted_to_training(0.0, true));
        assert!(!admitted_to_training(-1.0, false));
    }

    #[test]
    fn dirichlet_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = dirichlet(&[0.5, 3.0, 40.0], &mut rng);
            assert!(a.iter().all(|&v| v >= 0.0));
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
