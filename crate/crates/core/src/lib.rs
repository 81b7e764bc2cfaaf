//! Nonlinear least squares with random-weighting resampling.
//!
//! Fit a regression model by (weighted) least squares, refit it under many
//! random weight vectors, and use the recycled pivots to approximate the
//! sampling distribution of the estimator and build confidence intervals.

pub mod cli_io;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod models;
pub mod recycler;
pub mod stats;
pub mod weights;
pub mod wls;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use models::{
    model_by_id, ChwirutModel, CustomModel, ExpDecayModel, LinearModel, ParamBox, RegressionModel,
    SaturationModel,
};
pub use recycler::{
    confidence_interval, coverage_study, run_recycle, sampling_distribution_sim, CiResult,
    Direction, RecycleConfig, RecycleRun,
};
pub use weights::{WeightScheme, WeightSource, WeightVector};
pub use wls::{fit, FitResult, SolverConfig};
