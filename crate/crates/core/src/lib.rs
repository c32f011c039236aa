//! Regression-adjusted average treatment effect estimation for randomized
//! experiments, using cross-fitted machine-learning predictions as the
//! adjustment covariate.
//!
//! The typical flow is [`data::load_csv`] → [`estimators::mlrate_estimate`],
//! with [`estimators::diff_in_means`] and [`estimators::cuped_estimate`] as
//! baselines. [`sim`] holds the data generators and coverage studies.

pub mod crossfit;
pub mod data;
pub mod error;
pub mod estimators;
pub mod learners;
pub mod numerics;
pub mod sim;

pub use crossfit::{cross_fit, cross_fit_with_folds, preperiod_fit, CrossFitResult};
pub use data::{load_csv, split_folds, ExperimentDataset, PanelDataset};
pub use error::{Error, Result};
pub use estimators::{
    adjusted_fit, confidence_interval, cuped_estimate, diff_in_diff, diff_in_means, mlrate_estimate,
    relative_efficiency, AdjustmentFit, EstimateReport,
};
pub use learners::{train, LearnerSpec, Predictor};
pub use numerics::{DenseMatrix, RandomStream};
