//! Logistic regression, a one-hidden-layer MLP, the domain-adversarial
//! network, and the ANCOVA screening baseline.

mod adam;
mod ancova;
mod config;
mod network;
pub mod objective;
mod persist;
mod train;

pub use adam::Adam;
pub use ancova::{ancova_filter, ancova_p_values};
pub use config::{AdamConfig, TrainConfig};
pub use network::{ConfounderHead, Dense, NetworkParams};
pub use persist::{load_model, save_model, write_loss_history, ModelFile};
pub use train::{dann_fit, logreg_fit, mlp_fit, predict_proba, stratified_holdout, Fitted, LossRecord, Validation};
