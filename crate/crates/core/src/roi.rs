//! Gaussian region-of-interest densities over map locations.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gp::Point;

/// Bivariate normal `N(mean, cov)` describing where the Actor's task lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiGaussian {
    mean: Point,
    cov: [[f64; 2]; 2],
    det: f64,
}

impl RoiGaussian {
    pub fn new(mean: Point, cov: [[f64; 2]; 2]) -> Result<Self> {
        let (a, b, c, d) = (cov[0][0], cov[0][1], cov[1][0], cov[1][1]);
        let det = a * d - b * c;
        let finite = [a, b, c, d].iter().all(|v| v.is_finite());
        if !finite || (b - c).abs() > 1e-12 * a.abs().max(d.abs()).max(1.0) || a <= 0.0 || det <= 0.0 {
            return Err(Error::SingularRoi);
        }
        Ok(Self { mean, cov, det })
    }

    pub fn mean(&self) -> Point {
        self.mean
    }

    pub fn cov(&self) -> [[f64; 2]; 2] {
        self.cov
    }

    pub fn log_det(&self) -> f64 {
        self.det.ln()
    }

    /// Squared Mahalanobis distance `(x - μ)ᵀ Σ⁻¹ (x - μ)`.
    pub fn mahalanobis2(&self, x: Point) -> f64 {
        let dx = x[0] - self.mean[0];
        let dy = x[1] - self.mean[1];
        let [[a, b], [_, d]] = self.cov;
        (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / self.det
    }

    pub fn log_density(&self, x: Point) -> f64 {
        -(2.0 * PI).ln() - 0.5 * self.log_det() - 0.5 * self.mahalanobis2(x)
    }

    pub fn density(&self, x: Point) -> f64 {
        self.log_density(x).exp()
    }
}

/// Goal-centered isotropic RoI, `N(goal, σ̃² I)`.
pub fn roi_path_agnostic(goal: Point, sigma_tilde: f64) -> Result<RoiGaussian> {
    check_sigma(sigma_tilde)?;
    let s2 = sigma_tilde * sigma_tilde;
    RoiGaussian::new(goal, [[s2, 0.0], [0.0, s2]])
}

/// RoI fitted to a planned path: waypoint mean, waypoint scatter plus
/// `σ̃² I`.
pub fn roi_path_dependent(waypoints: &[Point], sigma_tilde: f64) -> Result<RoiGaussian> {
    check_sigma(sigma_tilde)?;
    if waypoints.is_empty() {
        return Err(Error::EmptyPath);
    }
    let m = waypoints.len() as f64;
    let mx = waypoints.iter().map(|w| w[0]).sum::<f64>() / m;
    let my = waypoints.iter().map(|w| w[1]).sum::<f64>() / m;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for w in waypoints {
        let (dx, dy) = (w[0] - mx, w[1] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let s2 = sigma_tilde * sigma_tilde;
    RoiGaussian::new([mx, my], [[sxx / m + s2, sxy / m], [sxy / m, syy / m + s2]])
}

pub fn roi_density(roi: &RoiGaussian, x: Point) -> f64 {
    roi.density(x)
}

fn check_sigma(sigma_tilde: f64) -> Result<()> {
    if sigma_tilde.is_finite() && sigma_tilde > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("RoI spread must be positive, got {sigma_tilde}")))
    }
}

/// Evenly spaced subset of at most `max` waypoints that always keeps both
/// ends of the path.
pub fn representative_waypoints<T: Copy>(path: &[T], max: usize) -> Vec<T> {
    let len = path.len();
    if len <= max || max == 0 {
        return path.to_vec();
    }
    if max == 1 {
        return vec![path[len - 1]];
    }
    (0..max)
        .map(|j| path[((j * (len - 1)) as f64 / (max - 1) as f64).round() as usize])
        .collect()
}

/// Default RoI spread: a third of the distance from the Sensor's start to
/// the Actor's goal, floored at one cell.
pub fn default_sigma_tilde(sensor_start: Point, goal: Point) -> f64 {
    let d = ((sensor_start[0] - goal[0]).powi(2) + (sensor_start[1] - goal[1]).powi(2)).sqrt();
    (d / 3.0).max(1.0)
}
