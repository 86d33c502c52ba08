//! Losses, their parameter gradients, and the two alternating update rules
//! in plain gradient-step form.
//!
//! Rule one moves extractor and label head down `L_k`. Rule two moves each
//! confounder head down its `L_i` and the extractor *up* `Σ L_i` (gradient
//! reversal). The trainers apply the same signs through Adam.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::network::{backward_stack, eval_stack, forward_stack, sigmoid, softplus, ConfounderHead, NetworkParams};
use crate::data::{Covariate, CovariateKind};
use crate::scalar::Scalar;

/// Mean binary cross-entropy on logits and its gradient w.r.t. the logits.
fn bce_with_logits<F: Scalar>(logits: ArrayView1<'_, F>, target: ArrayView1<'_, F>) -> (F, Array1<F>) {
    let n = F::from_usize_lossy(logits.len());
    let mut loss = F::zero();
    let mut grad = Array1::zeros(logits.len());
    for ((g, &z), &y) in grad.iter_mut().zip(logits).zip(target) {
        loss += softplus(z) - y * z;
        *g = (sigmoid(z) - y) / n;
    }
    (loss / n, grad)
}

fn mse<F: Scalar>(pred: ArrayView1<'_, F>, target: ArrayView1<'_, F>) -> (F, Array1<F>) {
    let n = F::from_usize_lossy(pred.len());
    let two = F::lit(2.0);
    let mut loss = F::zero();
    let mut grad = Array1::zeros(pred.len());
    for ((g, &p), &t) in grad.iter_mut().zip(pred).zip(target) {
        let r = p - t;
        loss += r * r;
        *g = two * r / n;
    }
    (loss / n, grad)
}

fn head_loss<F: Scalar>(kind: CovariateKind, out: ArrayView1<'_, F>, target: ArrayView1<'_, F>) -> (F, Array1<F>) {
    match kind {
        CovariateKind::Binary => bce_with_logits(out, target),
        CovariateKind::Continuous => mse(out, target),
    }
}

/// Target vector a head is trained against: 0/1 indicator for binary
/// covariates, standardized values for continuous ones.
pub fn head_targets<F: Scalar>(head: &ConfounderHead<F>, covariate: &Covariate<F>) -> Array1<F> {
    match head.kind {
        CovariateKind::Binary => covariate
            .values
            .mapv(|v| if v > F::zero() { F::one() } else { F::zero() }),
        CovariateKind::Continuous => covariate
            .values
            .mapv(|v| (v - head.target_mean) / head.target_scale),
    }
}

fn single_column<F: Scalar>(out: &Array2<F>) -> ArrayView1<'_, F> {
    debug_assert_eq!(out.ncols(), 1);
    out.column(0)
}

/// Label-head logits for every row of `x`.
pub fn label_logits<F: Scalar>(params: &NetworkParams<F>, x: ArrayView2<'_, F>) -> Array1<F> {
    let out = if params.extractor.is_empty() {
        eval_stack(&params.label_head, x)
    } else {
        eval_stack(&params.label_head, eval_stack(&params.extractor, x).view())
    };
    out.column(0).to_owned()
}

/// `L_k`: mean cross-entropy of the label head. `y` holds 0/1.
pub fn label_loss<F: Scalar>(params: &NetworkParams<F>, x: ArrayView2<'_, F>, y: ArrayView1<'_, F>) -> F {
    bce_with_logits(label_logits(params, x).view(), y).0
}

/// `L_k` and its gradient; confounder-head entries of the result are zero.
pub fn label_loss_grad<F: Scalar>(
    params: &NetworkParams<F>,
    x: ArrayView2<'_, F>,
    y: ArrayView1<'_, F>,
) -> (F, NetworkParams<F>) {
    let (features, ext_cache) = forward_stack(&params.extractor, x);
    let (out, head_cache) = forward_stack(&params.label_head, features.view());
    let (loss, dz) = bce_with_logits(single_column(&out), y);
    let (head_grads, d_features) = backward_stack(&params.label_head, &head_cache, dz.insert_axis(Axis(1)), !params.extractor.is_empty());
    let mut grads = params.zeros_like();
    grads.label_head = head_grads;
    if !params.extractor.is_empty() {
        grads.extractor = backward_stack(&params.extractor, &ext_cache, d_features, false).0;
    }
    (loss, grads)
}

/// `L_i` for every confounder head. `targets[i]` comes from [`head_targets`].
pub fn confounder_losses<F: Scalar>(
    params: &NetworkParams<F>,
    x: ArrayView2<'_, F>,
    targets: &[Array1<F>],
) -> Vec<F> {
    if params.confounder_heads.is_empty() {
        return Vec::new();
    }
    let features = eval_stack(&params.extractor, x);
    params
        .confounder_heads
        .iter()
        .zip(targets)
        .map(|(head, t)| {
            let out = eval_stack(&head.layers, features.view());
            head_loss(head.kind, single_column(&out), t.view()).0
        })
        .collect()
}

/// Each `L_i` plus gradients: head `i` holds `dL_i/dθ_i`; the extractor holds
/// `Σ_i dL_i/dθ_g` (not yet reversed). Label-head entries are zero.
pub fn confounder_loss_grad<F: Scalar>(
    params: &NetworkParams<F>,
    x: ArrayView2<'_, F>,
    targets: &[Array1<F>],
) -> (Vec<F>, NetworkParams<F>) {
    assert_eq!(params.confounder_heads.len(), targets.len());
    let (features, ext_cache) = forward_stack(&params.extractor, x);
    let mut grads = params.zeros_like();
    let mut d_features = Array2::<F>::zeros(features.dim());
    let mut losses = Vec::with_capacity(targets.len());
    for (i, (head, t)) in params.confounder_heads.iter().zip(targets).enumerate() {
        let (out, cache) = forward_stack(&head.layers, features.view());
        let (loss, dz) = head_loss(head.kind, single_column(&out), t.view());
        let (g, df) = backward_stack(&head.layers, &cache, dz.insert_axis(Axis(1)), true);
        grads.confounder_heads[i].layers = g;
        d_features += &df;
        losses.push(loss);
    }
    if !params.extractor.is_empty() {
        grads.extractor = backward_stack(&params.extractor, &ext_cache, d_features, false).0;
    }
    (losses, grads)
}

fn axpy_layers<F: Scalar>(
    params: &mut [super::network::Dense<F>],
    grads: &[super::network::Dense<F>],
    scale: F,
) {
    for (p, g) in params.iter_mut().zip(grads) {
        p.weight.scaled_add(scale, &g.weight);
        p.bias.scaled_add(scale, &g.bias);
    }
}

/// Rule one: `θ_g ← θ_g − α dL_k/dθ_g`, `θ_k ← θ_k − α dL_k/dθ_k`.
pub fn apply_label_rule<F: Scalar>(params: &mut NetworkParams<F>, grads: &NetworkParams<F>, step: F) {
    axpy_layers(&mut params.extractor, &grads.extractor, -step);
    axpy_layers(&mut params.label_head, &grads.label_head, -step);
}

/// Which parameter groups a rule-two step touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdversaryScope {
    pub extractor: bool,
    pub heads: bool,
}

impl AdversaryScope {
    pub const BOTH: Self = Self {
        extractor: true,
        heads: true,
    };
    pub const EXTRACTOR_ONLY: Self = Self {
        extractor: true,
        heads: false,
    };
    pub const HEADS_ONLY: Self = Self {
        extractor: false,
        heads: true,
    };
}

/// Rule two: `θ_g ← θ_g + α Σ dL_i/dθ_g`, `θ_i ← θ_i − α dL_i/dθ_i`.
pub fn apply_adversary_rule<F: Scalar>(
    params: &mut NetworkParams<F>,
    grads: &NetworkParams<F>,
    step: F,
    scope: AdversaryScope,
) {
    if scope.extractor {
        axpy_layers(&mut params.extractor, &grads.extractor, step);
    }
    if scope.heads {
        for (h, g) in params.confounder_heads.iter_mut().zip(&grads.confounder_heads) {
            axpy_layers(&mut h.layers, &g.layers, -step);
        }
    }
}
