//! Exact Gaussian-process regression with a squared-exponential ARD kernel.

mod dataset;
mod exact;
mod fit;
mod kernel;

pub use dataset::Dataset;
pub use exact::{gp_posterior, lml_gradient, log_marginal_likelihood, ExactGp, GaussianPrediction, LmlEvaluator};
pub use fit::{adam_step, fit_hyperparams, Adam, FitOptions, FitResult, LrSchedule};
pub use kernel::{kernel_matrix, KernelParams, Point, LOG_PARAM_BOUND, N_PARAMS};
