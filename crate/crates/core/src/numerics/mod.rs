//! Numerical kernel: least squares, normal quantiles, moments, random streams
//! and quadrature.

pub mod linalg;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use linalg::{least_squares, mat_vec, DenseMatrix, LeastSquares, RANK_TOLERANCE};
pub use normal::normal_quantile;
pub use quadrature::GaussHermite;
pub use rng::RandomStream;
pub use stats::{correlation, mean, sample_covariance, sample_variance};
