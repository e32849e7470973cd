//! Federated link prediction for social learning networks.
//!
//! The crate builds pairwise topology features from student interaction
//! graphs, trains a small feedforward classifier per client under
//! centralized, FedAvg and personalized regimes, and evaluates accuracy,
//! cross-client fairness and exact Shapley attributions.
//!
//! Numeric code is generic over [`Scalar`]; the aliases at the crate root fix
//! it to `f64`, which is what the runner and CLI use.

pub mod analysis;
pub mod error;
pub mod features;
pub mod graph;
pub mod federation;
pub mod neural;
pub mod personalization;
pub mod rng;
pub mod runner;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision feature vector.
pub type Features = features::FeatureVector<f64>;
/// Double-precision labelled pair.
pub type Example = features::PairExample<f64>;
/// Double-precision model parameters.
pub type Model = neural::ModelParams<f64>;
/// Double-precision training sample.
pub type TrainSample = neural::Sample<f64>;
/// Double-precision metrics.
pub type Metrics = neural::MetricsReport<f64>;
