//! Debiased weighted LASSO detection for compressed-sensing radar.
//!
//! The pipeline for one measurement `y = A x0 + noise`:
//!
//! 1. [`solver::solve_weighted_lasso`] computes the weighted LASSO estimate.
//! 2. [`debias::debias`] solves the debiasing fixed point, forms the debiased
//!    estimate and its per-entry error variance `sigma_w^2`.
//! 3. [`detectors::threshold_from_pfa`] turns target false-alarm rates into
//!    thresholds and [`detectors::dwld_detect`] makes the per-entry decisions.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the harness uses.

// Validation is written as `!(x > 0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod debias;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod stats;
pub mod weight_opt;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ComplexSignal = model::ComplexSignal<f64>;
pub type DesignMatrix = model::DesignMatrix<f64>;
pub type PriorVector = model::PriorVector<f64>;
pub type NoiseSpec = model::NoiseSpec<f64>;
pub type SceneConfig = model::SceneConfig<f64>;
pub type SparseScene = model::SparseScene<f64>;
pub type WeightVector = solver::WeightVector<f64>;
pub type SolverOptions = solver::SolverOptions<f64>;
pub type DebiasResult = debias::DebiasResult<f64>;
pub type ThresholdVector = detectors::ThresholdVector<f64>;
pub type WeightModel = weight_opt::WeightModel<f64>;

pub use model::MatrixKind;
