//! Online stage: deterministic (weighted NLS) and Bayesian (ensemble MCMC)
//! identification of bulk and shear moduli with a frozen surrogate.

mod bayes;
mod mcmc;
mod nls;

pub use bayes::{
    add_synthetic_noise, coverage_test, covariance_from_weights, gaussian_log_density, log_likelihood, sample_posterior, CoverageCase,
    CoverageConfig, CoverageReport, Likelihood, NoiseModel,
};
pub use mcmc::{credible_interval, histogram, stretch_move_mcmc, CredibleInterval, Histogram, McmcConfig, PosteriorSample, MIN_DRAWS};
pub use nls::{
    lookup_table_baseline, nls_calibrate, parameters_to_state, parameters_to_state_jacobian, NlsObjective, NlsResult, StateVector,
    WeightMatrix,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("cannot weight data with zero mean absolute displacement {mean_abs:?}")]
    Weights { mean_abs: [f64; 2] },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
