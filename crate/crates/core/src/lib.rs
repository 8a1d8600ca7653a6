//! Gaussian-process map relay between a scouting Sensor and a navigating
//! Actor on a grid.
//!
//! The crate covers exact and sparse GP regression, β-SGP inducing-point
//! selection against a region-of-interest prior, the two agents' loops, the
//! episode simulator and the evaluation metrics.

pub mod ablation;
pub mod actor;
pub mod beta_sgp;
pub mod error;
pub mod gp;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod planner;
pub mod roi;
pub mod sensor;
pub mod sgpr;
pub mod sim;

pub use error::{Error, Result};
pub use gp::{Dataset, GaussianPrediction, KernelParams, Point};
pub use grid::{Action, Cell, GridDims, GridMap, MapSource};
pub use roi::RoiGaussian;
pub use sim::{EpisodeRecord, Framework, SimConfig};
