//! Model JSON (shapes plus row-major parameters) and loss-history CSV.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::network::{ConfounderHead, Dense, NetworkParams};
use super::train::LossRecord;
use crate::data::io_json::{fmt_real, read_json, write_json};
use crate::data::CovariateKind;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    /// `[inputs, outputs]`.
    pub shape: [usize; 2],
    pub relu: bool,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadFile {
    pub kind: CovariateKind,
    pub target_mean: f64,
    pub target_scale: f64,
    pub layers: Vec<LayerFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub method: String,
    pub extractor: Vec<LayerFile>,
    pub label_head: Vec<LayerFile>,
    pub confounder_heads: Vec<HeadFile>,
    pub config: TrainConfig,
    pub selected_step: usize,
}

fn layer_file<F: Scalar>(l: &Dense<F>) -> LayerFile {
    LayerFile {
        shape: [l.inputs(), l.outputs()],
        relu: l.relu,
        weight: l.weight.iter().map(|v| v.to_f64_lossy()).collect(),
        bias: l.bias.iter().map(|v| v.to_f64_lossy()).collect(),
    }
}

fn layer<F: Scalar>(f: &LayerFile) -> Result<Dense<F>> {
    let [i, o] = f.shape;
    if f.weight.len() != i * o || f.bias.len() != o {
        return Err(Error::InvalidData(format!("layer {i}x{o} has wrong parameter count")));
    }
    Ok(Dense {
        weight: Array2::from_shape_vec((i, o), f.weight.iter().map(|&v| F::lit(v)).collect())
            .map_err(|e| Error::InvalidData(e.to_string()))?,
        bias: Array1::from_iter(f.bias.iter().map(|&v| F::lit(v))),
        relu: f.relu,
    })
}

impl ModelFile {
    pub fn new<F: Scalar>(method: &str, params: &NetworkParams<F>, config: &TrainConfig, selected_step: usize) -> Self {
        Self {
            method: method.to_string(),
            extractor: params.extractor.iter().map(layer_file).collect(),
            label_head: params.label_head.iter().map(layer_file).collect(),
            confounder_heads: params
                .confounder_heads
                .iter()
                .map(|h| HeadFile {
                    kind: h.kind,
                    target_mean: h.target_mean.to_f64_lossy(),
                    target_scale: h.target_scale.to_f64_lossy(),
                    layers: h.layers.iter().map(layer_file).collect(),
                })
                .collect(),
            config: config.clone(),
            selected_step,
        }
    }

    pub fn params<F: Scalar>(&self) -> Result<NetworkParams<F>> {
        let params = NetworkParams {
            extractor: self.extractor.iter().map(layer).collect::<Result<_>>()?,
            label_head: self.label_head.iter().map(layer).collect::<Result<_>>()?,
            confounder_heads: self
                .confounder_heads
                .iter()
                .map(|h| {
                    Ok(ConfounderHead {
                        kind: h.kind,
                        layers: h.layers.iter().map(layer).collect::<Result<_>>()?,
                        target_mean: F::lit(h.target_mean),
                        target_scale: F::lit(h.target_scale),
                    })
                })
                .collect::<Result<_>>()?,
        };
        if !params.validate() {
            return Err(Error::InvalidData("model layers do not chain".into()));
        }
        Ok(params)
    }
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    write_json(path, model)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    read_json(path)
}

/// `step,label_loss,confounder_loss_1..,selection_metric,accuracy`.
pub fn write_loss_history(path: &Path, history: &[LossRecord]) -> Result<()> {
    let k = history.first().map_or(0, |r| r.confounder_losses.len());
    let mut out = String::from("step,label_loss");
    for i in 1..=k {
        let _ = write!(out, ",confounder_loss_{i}");
    }
    out.push_str(",selection_metric,accuracy\n");
    for r in history {
        let _ = write!(out, "{},{}", r.step, fmt_real(r.label_loss));
        for l in &r.confounder_losses {
            let _ = write!(out, ",{}", fmt_real(*l));
        }
        let _ = writeln!(out, ",{},{}", fmt_real(r.selection_metric), fmt_real(r.accuracy));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn model_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let params = NetworkParams::<f64> {
            extractor: vec![Dense::glorot(3, 2, true, &mut rng)],
            label_head: vec![Dense::glorot(2, 1, false, &mut rng)],
            confounder_heads: vec![ConfounderHead {
                kind: CovariateKind::Continuous,
                layers: vec![Dense::glorot(2, 2, true, &mut rng), Dense::glorot(2, 1, false, &mut rng)],
                target_mean: 0.5,
                target_scale: 2.0,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&path, &ModelFile::new("dann", &params, &TrainConfig::default(), 100)).unwrap();
        let back: NetworkParams<f64> = load_model(&path).unwrap().params().unwrap();
        assert_eq!(back, params);
    }

    #[test]
    fn loss_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let rec = LossRecord {
            step: 100,
            label_loss: 0.5,
            confounder_losses: vec![1.0, 2.0],
            selection_metric: -2.5,
            accuracy: 0.75,
        };
        write_loss_history(&path, &[rec]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("step,label_loss,confounder_loss_1,confounder_loss_2,selection_metric,accuracy\n100,"));
    }
}
