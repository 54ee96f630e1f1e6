//! Forecasting with temporal-difference alignment.
//!
//! The crate provides the pieces needed to train channel-shared linear
//! forecasters on multivariate series with an objective that, besides the
//! usual point-wise error, penalizes the mismatch between the step-to-step
//! changes of the prediction and those of the target. The two terms are mixed
//! by the batch's sign-inconsistency ratio `rho`, the fraction of steps whose
//! predicted change direction disagrees with the true one.
//!
//! * [`series`]: panels, CSV ingestion, chronological splits, z-scoring, windows, generators.
//! * [`loss`]: differences, losses, `rho`, the combined objective and its gradient.
//! * [`forecaster`]: Linear and DLinear models with analytic backward passes.
//! * [`trainer`]: Adam, early stopping, evaluation.
//! * [`theory`]: closed forms for the Markov-likelihood discrepancy and the
//!   expected `rho`, with Monte Carlo counterparts.

pub mod error;
pub mod forecaster;
pub mod loss;
pub mod rng;
pub mod series;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
pub use forecaster::{ForecasterParams, GradSet, ModelKind};
pub use loss::{BaseLoss, DiffSpec, LossConfig, LossMode, LossReport, MetricsReport};
pub use series::{SeriesMatrix, SplitSpec, WindowBatch, ZScoreScaler};
pub use trainer::{TrainConfig, TrainReport};
