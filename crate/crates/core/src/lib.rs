//! Confounder removal for high-dimensional classification.
//!
//! * [`onion`] builds an orthonormal basis of confounder-covarying directions
//!   and projects data onto its orthogonal complement.
//! * [`models`] trains logistic regression, a one-hidden-layer network and a
//!   domain-adversarial network with per-confounder heads.
//! * [`simulate`] and [`confound`] produce confounded data; [`eval`] scores
//!   methods on entire and confounded test sets.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod confound;
pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod models;
pub mod onion;
mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DataMatrix64 = data::DataMatrix<f64>;
pub type DataMatrix32 = data::DataMatrix<f32>;
pub type Dataset64 = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type OrthonormalBasis64 = onion::OrthonormalBasis<f64>;
pub type OrthonormalBasis32 = onion::OrthonormalBasis<f32>;
pub type NetworkParams64 = models::NetworkParams<f64>;
pub type NetworkParams32 = models::NetworkParams<f32>;
