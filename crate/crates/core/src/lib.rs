//! Two-stage Schrödinger bridge sampling.
//!
//! Stage 1 drives particles from a point mass at the origin to the
//! noise-smoothed target `q_sigma`; stage 2 anneals them from `q_sigma` to the
//! target. Both stages are Euler-Maruyama integrations whose drifts come either
//! from trained estimators (a noise-conditional score network and a logistic
//! density-ratio network) or, for Gaussian-mixture targets, from closed-form
//! expressions that double as test oracles.

// Negated comparisons are deliberate: they reject NaN along with out-of-range
// values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adam;
pub mod bridge;
pub mod checkpoint;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod matrix;
pub mod mlp;
pub mod ratio;
pub mod reference;
pub mod rng;
pub mod score;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use bridge::{BridgeConfig, DriftModel, DriftSource, ExactDrift, LearnedDrift, ParticleBatch};
pub use error::{Error, Result};
pub use experiment::ExperimentConfig;
pub use matrix::Matrix;
pub use mlp::{Gradients, MlpNetwork};
pub use ratio::{RatioModel, TrainedRatio};
pub use reference::{GaussianMixture, IsotropicGaussian};
pub use rng::Rng;
pub use score::{ScoreModel, TrainedScore};
pub use train::{Architecture, TrainConfig};
