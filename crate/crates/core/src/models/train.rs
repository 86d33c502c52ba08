use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::TrainConfig;
use super::network::{sigmoid, tensors, tensors_mut, ConfounderHead, Dense, NetworkParams};
use super::objective::{
    confounder_loss_grad, confounder_losses, head_targets, label_logits, label_loss_grad,
};
use crate::data::{Covariate, CovariateKind, DataMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Validation-set losses at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub label_loss: f64,
    pub confounder_losses: Vec<f64>,
    /// `L_k − Σ α_i L_i`.
    pub selection_metric: f64,
    pub accuracy: f64,
}

impl LossRecord {
    pub fn recompute_metric(&self, alphas: &[f64]) -> f64 {
        self.label_loss
            - alphas
                .iter()
                .zip(&self.confounder_losses)
                .map(|(a, l)| a * l)
                .sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct Fitted<F> {
    /// Selected checkpoint.
    pub params: NetworkParams<F>,
    /// Parameters after the last iteration.
    pub final_params: NetworkParams<F>,
    pub history: Vec<LossRecord>,
    pub selected_step: usize,
}

/// Held-out data for checkpoint selection.
#[derive(Clone, Debug)]
pub struct Validation<'a, F> {
    pub x: &'a DataMatrix<F>,
    pub labels: &'a [bool],
    pub confounders: &'a [Covariate<F>],
}

#[derive(Clone, Debug, PartialEq)]
enum Selection {
    Final,
    Accuracy,
    Metric(Vec<f64>),
}

struct Split<F> {
    x: Array2<F>,
    y: Array1<F>,
    labels: Vec<bool>,
    confounders: Vec<Covariate<F>>,
}

impl<F: Scalar> Split<F> {
    fn from_parts(x: ArrayView2<'_, F>, labels: &[bool], confounders: &[Covariate<F>], rows: Option<&[usize]>) -> Self {
        match rows {
            None => Self {
                x: x.to_owned(),
                y: to_targets(labels),
                labels: labels.to_vec(),
                confounders: confounders.to_vec(),
            },
            Some(rows) => {
                let labels: Vec<bool> = rows.iter().map(|&i| labels[i]).collect();
                Self {
                    x: x.select(Axis(0), rows),
                    y: to_targets(&labels),
                    labels,
                    confounders: confounders
                        .iter()
                        .map(|c| Covariate {
                            name: c.name.clone(),
                            kind: c.kind,
                            values: c.values.select(Axis(0), rows),
                        })
                        .collect(),
                }
            }
        }
    }
}

fn to_targets<F: Scalar>(labels: &[bool]) -> Array1<F> {
    labels.iter().map(|&b| if b { F::one() } else { F::zero() }).collect()
}

fn check_inputs<F: Scalar>(x: &DataMatrix<F>, labels: &[bool], confounders: &[Covariate<F>]) -> Result<()> {
    if labels.len() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            actual: labels.len(),
            context: "label length",
        });
    }
    if let Some(c) = confounders.iter().find(|c| c.values.len() != x.n()) {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            actual: c.values.len(),
            context: "confounder length",
        });
    }
    Ok(())
}

/// Stratified holdout: `round(fraction · count)` of each class, at least one
/// when the class has two or more members.
pub fn stratified_holdout<R: Rng + ?Sized>(labels: &[bool], fraction: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let mut take = (fraction * idx.len() as f64).round() as usize;
        if take == 0 && fraction > 0.0 && idx.len() >= 2 {
            take = 1;
        }
        holdout.extend_from_slice(&idx[..take]);
        train.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    holdout.sort_unstable();
    (train, holdout)
}

/// Logistic regression by mini-batch Adam from a zero start. Uses every
/// sample for training and returns the final iterate; the loss history is
/// measured on the training data.
pub fn logreg_fit<F: Scalar>(x: &DataMatrix<F>, labels: &[bool], config: &TrainConfig) -> Result<Fitted<F>> {
    config.validate()?;
    check_inputs(x, labels, &[])?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = NetworkParams {
        extractor: vec![],
        label_head: vec![Dense::zeros(x.p(), 1, false)],
        confounder_heads: vec![],
    };
    let train = Split::from_parts(x.view(), labels, &[], None);
    run(params, &train, None, config, Selection::Final, &mut rng)
}

/// One-hidden-layer rectifier network; the checkpoint with the best
/// validation accuracy is kept.
pub fn mlp_fit<F: Scalar>(x: &DataMatrix<F>, labels: &[bool], config: &TrainConfig) -> Result<Fitted<F>> {
    network_fit(x, labels, &[], config, None, Selection::Accuracy)
}

/// Domain-adversarial network: the MLP above plus one head per confounder
/// fed by the shared hidden layer. Each label update is followed by
/// `adversary_steps_per_label_step` confounder updates that reverse the
/// gradient into the extractor. The kept checkpoint minimizes
/// `L_k − Σ α_i L_i` on validation data.
///
/// Without `validation`, a stratified `validation_fraction` of the training
/// rows is held out.
pub fn dann_fit<F: Scalar>(
    x: &DataMatrix<F>,
    labels: &[bool],
    confounders: &[Covariate<F>],
    config: &TrainConfig,
    validation: Option<Validation<'_, F>>,
) -> Result<Fitted<F>> {
    let alphas = config.selection_weights(confounders.len())?;
    network_fit(x, labels, confounders, config, validation, Selection::Metric(alphas))
}

fn network_fit<F: Scalar>(
    x: &DataMatrix<F>,
    labels: &[bool],
    confounders: &[Covariate<F>],
    config: &TrainConfig,
    validation: Option<Validation<'_, F>>,
    selection: Selection,
) -> Result<Fitted<F>> {
    config.validate()?;
    check_inputs(x, labels, confounders)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (train, val) = match validation {
        Some(v) => {
            check_inputs(v.x, v.labels, v.confounders)?;
            if v.x.p() != x.p() || v.confounders.len() != confounders.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.p(),
                    actual: v.x.p(),
                    context: "validation shape",
                });
            }
            (
                Split::from_parts(x.view(), labels, confounders, None),
                Some(Split::from_parts(v.x.view(), v.labels, v.confounders, None)),
            )
        }
        None if config.validation_fraction > 0.0 => {
            let (tr, va) = stratified_holdout(labels, config.validation_fraction, &mut rng);
            if tr.is_empty() || va.is_empty() {
                return Err(Error::InvalidData("too few samples for a validation split".into()));
            }
            (
                Split::from_parts(x.view(), labels, confounders, Some(&tr)),
                Some(Split::from_parts(x.view(), labels, confounders, Some(&va))),
            )
        }
        None => (Split::from_parts(x.view(), labels, confounders, None), None),
    };

    let h = config.hidden_units;
    let mut params = NetworkParams {
        extractor: vec![Dense::glorot(x.p(), h, true, &mut rng)],
        label_head: vec![Dense::glorot(h, 1, false, &mut rng)],
        confounder_heads: Vec::with_capacity(confounders.len()),
    };
    for c in &train.confounders {
        let (mean, scale) = match c.kind {
            CovariateKind::Binary => (F::zero(), F::one()),
            CovariateKind::Continuous => {
                let m = c.values.mean().unwrap_or(F::zero());
                let s = c.values.mapv(|v| (v - m) * (v - m)).mean().unwrap_or(F::zero()).sqrt();
                (m, if s > F::zero() { s } else { F::one() })
            }
        };
        params.confounder_heads.push(ConfounderHead {
            kind: c.kind,
            layers: vec![Dense::glorot(h, h, true, &mut rng), Dense::glorot(h, 1, false, &mut rng)],
            target_mean: mean,
            target_scale: scale,
        });
    }
    let selection = if val.is_none() { Selection::Final } else { selection };
    run(params, &train, val.as_ref(), config, selection, &mut rng)
}

fn accuracy<F: Scalar>(logits: &Array1<F>, labels: &[bool]) -> f64 {
    let hits = logits
        .iter()
        .zip(labels)
        .filter(|(z, &y)| (**z > F::zero()) == y)
        .count();
    hits as f64 / labels.len() as f64
}

fn evaluate<F: Scalar>(params: &NetworkParams<F>, data: &Split<F>, targets: &[Array1<F>], alphas: &[f64], step: usize) -> LossRecord {
    let logits = label_logits(params, data.x.view());
    let n = F::from_usize_lossy(logits.len());
    let label_loss = logits
        .iter()
        .zip(&data.y)
        .map(|(&z, &y)| super::network::softplus(z) - y * z)
        .sum::<F>()
        / n;
    let confounder_losses: Vec<f64> = confounder_losses(params, data.x.view(), targets)
        .into_iter()
        .map(Scalar::to_f64_lossy)
        .collect();
    let mut record = LossRecord {
        step,
        label_loss: label_loss.to_f64_lossy(),
        confounder_losses,
        selection_metric: 0.0,
        accuracy: accuracy(&logits, &data.labels),
    };
    let alphas = if alphas.is_empty() {
        vec![1.0; record.confounder_losses.len()]
    } else {
        alphas.to_vec()
    };
    record.selection_metric = record.recompute_metric(&alphas);
    record
}

fn targets_for<F: Scalar>(params: &NetworkParams<F>, data: &Split<F>) -> Vec<Array1<F>> {
    params
        .confounder_heads
        .iter()
        .zip(&data.confounders)
        .map(|(h, c)| head_targets(h, c))
        .collect()
}

fn add_l2<F: Scalar>(grads: &mut [Dense<F>], params: &[Dense<F>], l2: F) {
    if l2 > F::zero() {
        for (g, p) in grads.iter_mut().zip(params) {
            g.weight.scaled_add(l2, &p.weight);
        }
    }
}

fn run<F: Scalar, R: Rng>(
    mut params: NetworkParams<F>,
    train: &Split<F>,
    val: Option<&Split<F>>,
    config: &TrainConfig,
    selection: Selection,
    rng: &mut R,
) -> Result<Fitted<F>> {
    let n = train.x.nrows();
    if n == 0 {
        return Err(Error::InvalidData("empty training set".into()));
    }
    let l2 = F::lit(config.l2);
    let train_targets = targets_for(&params, train);
    let val_targets = val.map(|v| targets_for(&params, v)).unwrap_or_default();
    let alphas = match &selection {
        Selection::Metric(a) => a.clone(),
        _ => Vec::new(),
    };
    let adversarial = !params.confounder_heads.is_empty();

    let mut label_opt = Adam::new(config.learning_rate, &config.optimizer);
    let mut extractor_adv_opt = Adam::new(config.learning_rate, &config.optimizer);
    let mut heads_opt = Adam::new(config.learning_rate, &config.optimizer);

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, NetworkParams<F>)> = None;
    let mut batch = vec![0usize; config.batch_size];

    for step in 1..=config.iterations {
        for b in batch.iter_mut() {
            *b = rng.gen_range(0..n);
        }
        let xb = train.x.select(Axis(0), &batch);
        let yb = train.y.select(Axis(0), &batch);
        let (loss, mut grads) = label_loss_grad(&params, xb.view(), yb.view());
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        add_l2(&mut grads.extractor, &params.extractor, l2);
        add_l2(&mut grads.label_head, &params.label_head, l2);
        {
            let mut p = tensors_mut(&mut params.extractor);
            p.extend(tensors_mut(&mut params.label_head));
            let mut g = tensors(&grads.extractor);
            g.extend(tensors(&grads.label_head));
            label_opt.step(p, g, false);
        }

        if adversarial {
            for _ in 0..config.adversary_steps_per_label_step {
                for b in batch.iter_mut() {
                    *b = rng.gen_range(0..n);
                }
                let xb = train.x.select(Axis(0), &batch);
                let tb: Vec<Array1<F>> = train_targets.iter().map(|t| t.select(Axis(0), &batch)).collect();
                let (losses, mut grads) = confounder_loss_grad(&params, xb.view(), &tb);
                if losses.iter().any(|l| !l.is_finite()) {
                    return Err(Error::NonFiniteLoss { step });
                }
                extractor_adv_opt.step(tensors_mut(&mut params.extractor), tensors(&grads.extractor), true);
                let mut p = Vec::new();
                let mut g = Vec::new();
                for (hp, hg) in params.confounder_heads.iter_mut().zip(grads.confounder_heads.iter_mut()) {
                    add_l2(&mut hg.layers, &hp.layers, l2);
                    p.extend(tensors_mut(&mut hp.layers));
                }
                for hg in &grads.confounder_heads {
                    g.extend(tensors(&hg.layers));
                }
                heads_opt.step(p, g, false);
            }
        }

        if step % config.checkpoint_every == 0 || step == config.iterations {
            let (data, targets) = match val {
                Some(v) => (v, &val_targets),
                None => (train, &train_targets),
            };
            let record = evaluate(&params, data, targets, &alphas, step);
            if !record.label_loss.is_finite() || record.confounder_losses.iter().any(|l| !l.is_finite()) {
                return Err(Error::NonFiniteLoss { step });
            }
            // Scores are "higher is better".
            let score = match &selection {
                Selection::Final => step as f64,
                Selection::Accuracy => record.accuracy,
                Selection::Metric(_) => -record.selection_metric,
            };
            if best.as_ref().map_or(true, |(s, _, _)| score > *s) {
                best = Some((score, step, params.clone()));
            }
            history.push(record);
        }
    }

    let (_, selected_step, selected) = best.expect("at least one checkpoint");
    Ok(Fitted {
        params: selected,
        final_params: params,
        history,
        selected_step,
    })
}

/// `σ(label logit)` per row.
pub fn predict_proba<F: Scalar>(params: &NetworkParams<F>, x: &DataMatrix<F>) -> Result<Array1<F>> {
    if x.p() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            actual: x.p(),
            context: "model input width",
        });
    }
    Ok(label_logits(params, x.view()).mapv(sigmoid))
}
