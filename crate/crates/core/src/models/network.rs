//! Fully connected layers with manual backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::data::CovariateKind;
use crate::scalar::Scalar;

/// Affine layer `z = a W + b`, optionally followed by a rectifier.
/// `weight` is `inputs × outputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
    pub relu: bool,
}

impl<F: Scalar> Dense<F> {
    pub fn zeros(inputs: usize, outputs: usize, relu: bool) -> Self {
        Self {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
            relu,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, relu: bool, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = Array2::from_shape_fn((inputs, outputs), |_| F::lit(rng.gen_range(-limit..limit)));
        Self {
            weight,
            bias: Array1::zeros(outputs),
            relu,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.inputs(), self.outputs(), self.relu)
    }
}

/// One confounder-prediction head `f_{Y_i}` and the target transform it was
/// trained with (continuous targets are standardized).
#[derive(Clone, Debug, PartialEq)]
pub struct ConfounderHead<F> {
    pub kind: CovariateKind,
    pub layers: Vec<Dense<F>>,
    pub target_mean: F,
    pub target_scale: F,
}

/// Shared extractor `g`, label head `f_{Y_k}` and confounder heads.
/// Logistic regression has an empty extractor and a single-layer head.
///
/// The same type doubles as a gradient container with identical shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<F> {
    pub extractor: Vec<Dense<F>>,
    pub label_head: Vec<Dense<F>>,
    pub confounder_heads: Vec<ConfounderHead<F>>,
}

pub(crate) struct StackCache<F> {
    inputs: Vec<Array2<F>>,
    pre: Vec<Array2<F>>,
}

pub(crate) fn forward_stack<F: Scalar>(layers: &[Dense<F>], x: ArrayView2<'_, F>) -> (Array2<F>, StackCache<F>) {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut a = x.to_owned();
    for layer in layers {
        let z = a.dot(&layer.weight) + &layer.bias;
        let out = if layer.relu {
            z.mapv(|v| v.max(F::zero()))
        } else {
            z.clone()
        };
        inputs.push(std::mem::replace(&mut a, out));
        pre.push(z);
    }
    (a, StackCache { inputs, pre })
}

/// Forward pass without keeping intermediate values.
pub(crate) fn eval_stack<F: Scalar>(layers: &[Dense<F>], x: ArrayView2<'_, F>) -> Array2<F> {
    let mut a: Option<Array2<F>> = None;
    for layer in layers {
        let input = a.as_ref().map_or(x.view(), |prev| prev.view());
        // The matrix-vector path is much faster for single-output layers.
        let mut z = if layer.weight.ncols() == 1 {
            input.dot(&layer.weight.column(0)).insert_axis(Axis(1))
        } else {
            input.dot(&layer.weight)
        };
        z += &layer.bias;
        if layer.relu {
            z.mapv_inplace(|v| v.max(F::zero()));
        }
        a = Some(z);
    }
    a.unwrap_or_else(|| x.to_owned())
}

/// Backpropagates `grad_out` (gradient w.r.t. the stack output). Returns
/// per-layer gradients and the gradient w.r.t. the stack input, which is
/// left empty (`0 × 0`) unless `input_grad` is set.
pub(crate) fn backward_stack<F: Scalar>(
    layers: &[Dense<F>],
    cache: &StackCache<F>,
    grad_out: Array2<F>,
    input_grad: bool,
) -> (Vec<Dense<F>>, Array2<F>) {
    let mut grads: Vec<Dense<F>> = layers.iter().map(Dense::zeros_like).collect();
    let mut delta = grad_out;
    for l in (0..layers.len()).rev() {
        if layers[l].relu {
            ndarray::Zip::from(&mut delta)
                .and(&cache.pre[l])
                .for_each(|d, &z| {
                    if z <= F::zero() {
                        *d = F::zero();
                    }
                });
        }
        // `dot` may return column-major output; keep the standard layout.
        grads[l].weight.assign(&cache.inputs[l].t().dot(&delta));
        grads[l].bias = delta.sum_axis(Axis(0));
        delta = if l > 0 || input_grad {
            delta.dot(&layers[l].weight.t())
        } else {
            Array2::zeros((0, 0))
        };
    }
    (grads, delta)
}

impl<F: Scalar> NetworkParams<F> {
    pub fn zeros_like(&self) -> Self {
        Self {
            extractor: self.extractor.iter().map(Dense::zeros_like).collect(),
            label_head: self.label_head.iter().map(Dense::zeros_like).collect(),
            confounder_heads: self
                .confounder_heads
                .iter()
                .map(|h| ConfounderHead {
                    kind: h.kind,
                    layers: h.layers.iter().map(Dense::zeros_like).collect(),
                    target_mean: h.target_mean,
                    target_scale: h.target_scale,
                })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.extractor
            .first()
            .or(self.label_head.first())
            .map(Dense::inputs)
            .unwrap_or(0)
    }

    /// Checks that consecutive layer widths chain and every value is finite.
    pub fn validate(&self) -> bool {
        fn chain<F: Scalar>(layers: &[Dense<F>], input: usize) -> Option<usize> {
            layers.iter().try_fold(input, |width, l| {
                let ok = l.inputs() == width
                    && l.bias.len() == l.outputs()
                    && l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite());
                ok.then_some(l.outputs())
            })
        }
        let Some(features) = chain(&self.extractor, self.input_dim()) else {
            return false;
        };
        chain(&self.label_head, features) == Some(1)
            && self
                .confounder_heads
                .iter()
                .all(|h| chain(&h.layers, features) == Some(1))
    }

    fn layers(&self) -> impl Iterator<Item = &Dense<F>> {
        self.extractor
            .iter()
            .chain(&self.label_head)
            .chain(self.confounder_heads.iter().flat_map(|h| &h.layers))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense<F>> {
        self.extractor
            .iter_mut()
            .chain(&mut self.label_head)
            .chain(self.confounder_heads.iter_mut().flat_map(|h| &mut h.layers))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Every parameter in a fixed order: extractor, label head, confounder
    /// heads; weights row-major then bias within each layer.
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in self.layers() {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[F]) {
        assert_eq!(flat.len(), self.parameter_count());
        let mut it = flat.iter().copied();
        for l in self.layers_mut() {
            for v in l.weight.iter_mut().chain(l.bias.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
    }
}

pub(crate) fn tensors_mut<F: Scalar>(layers: &mut [Dense<F>]) -> Vec<&mut [F]> {
    layers
        .iter_mut()
        .flat_map(|l| {
            [
                l.weight.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
        .collect()
}

pub(crate) fn tensors<F: Scalar>(layers: &[Dense<F>]) -> Vec<&[F]> {
    layers
        .iter()
        .flat_map(|l| {
            [
                l.weight.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
        .collect()
}

pub(crate) fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub(crate) fn softplus<F: Scalar>(z: F) -> F {
    z.max(F::zero()) + (-z.abs()).exp().ln_1p()
}
