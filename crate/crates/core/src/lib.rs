//! Kurtosis-based joint normality tests for multivariate time series with
//! statistically dependent samples.
//!
//! The crate provides Mardia's multivariate kurtosis with three null models
//! (independent samples, colored scalar closed form, colored bivariate
//! Monte Carlo calibration), an Archimedean-copula generator for colored
//! non-Gaussian series with exactly Gaussian marginals, random scalar and
//! planar projections, and a harness that measures empirical rejection
//! rates over many projections.
//!
//! The colored asymptotics assume stationary, strongly mixing processes
//! with finite moments up to order 16. That cannot be checked from data and
//! the library does not attempt to.

pub mod calibrate;
pub mod copula;
pub mod error;
pub mod harness;
pub mod kurtosis;
pub mod moments;
pub mod normal;
pub mod projection;
pub mod report;
pub mod rng;
pub mod series;

pub use calibrate::{calibrate_null, simulate_gaussian, Calibration, CalibrationBudget, GaussianSurrogate};
pub use copula::{ar1_filter, generate, psi, psi_inverse, sample_frailty, ArchimedeanFamily, FamilyKind, GeneratorConfig};
pub use error::{Error, Result};
pub use kurtosis::{
    colored_bivariate_null_moments, colored_scalar_null_moments, iid_null_moments, mardia_kurtosis, run_test,
    run_test_with, KurtosisValue, TestKind, TestOptions,
};
pub use moments::{sample_covariance, sample_cross_covariance, CovarianceSequence};
pub use projection::{project_1d, project_2d, sample_direction, sample_plane, Direction1D, Plane2D};
pub use report::{NullMoments, NullSource, TestReport};
pub use rng::RngStream;
pub use series::{center, TimeSeriesSample};
