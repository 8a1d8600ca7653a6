use faer::Mat;

/// A GP input location in grid-cell units.
pub type Point = [f64; 2];

/// Number of log-scale hyperparameters: signal variance, two lengthscales,
/// noise variance.
pub const N_PARAMS: usize = 4;

/// Hyperparameters are clamped to `[-LOG_PARAM_BOUND, LOG_PARAM_BOUND]` in
/// log space.
pub const LOG_PARAM_BOUND: f64 = 10.0;

/// Squared-exponential kernel hyperparameters plus observation noise, all on
/// a log scale. Lengthscales are in grid cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub log_signal_variance: f64,
    pub log_lengthscale: [f64; 2],
    pub log_noise_variance: f64,
}

impl KernelParams {
    pub fn new(signal_variance: f64, lengthscale: [f64; 2], noise_variance: f64) -> Self {
        Self {
            log_signal_variance: signal_variance.ln(),
            log_lengthscale: [lengthscale[0].ln(), lengthscale[1].ln()],
            log_noise_variance: noise_variance.ln(),
        }
    }

    pub fn isotropic(signal_variance: f64, lengthscale: f64, noise_variance: f64) -> Self {
        Self::new(signal_variance, [lengthscale, lengthscale], noise_variance)
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    pub fn lengthscale(&self) -> [f64; 2] {
        [self.log_lengthscale[0].exp(), self.log_lengthscale[1].exp()]
    }

    pub fn noise_variance(&self) -> f64 {
        self.log_noise_variance.exp()
    }

    /// `[log s², log ℓx, log ℓy, log σ²]`.
    pub fn to_array(&self) -> [f64; N_PARAMS] {
        [
            self.log_signal_variance,
            self.log_lengthscale[0],
            self.log_lengthscale[1],
            self.log_noise_variance,
        ]
    }

    pub fn from_array(v: [f64; N_PARAMS]) -> Self {
        Self { log_signal_variance: v[0], log_lengthscale: [v[1], v[2]], log_noise_variance: v[3] }
    }

    pub fn clamped(&self) -> Self {
        Self::from_array(self.to_array().map(|v| v.clamp(-LOG_PARAM_BOUND, LOG_PARAM_BOUND)))
    }

    pub fn eval(&self, a: Point, b: Point) -> f64 {
        let [lx, ly] = self.lengthscale();
        let dx = (a[0] - b[0]) / lx;
        let dy = (a[1] - b[1]) / ly;
        self.signal_variance() * (-0.5 * (dx * dx + dy * dy)).exp()
    }
}

/// Dense `|a| x |b|` kernel matrix.
pub fn kernel_matrix(params: &KernelParams, a: &[Point], b: &[Point]) -> Mat<f64> {
    let s2 = params.signal_variance();
    let [lx, ly] = params.lengthscale();
    let (ix, iy) = (1.0 / (lx * lx), 1.0 / (ly * ly));
    Mat::from_fn(a.len(), b.len(), |i, j| {
        let dx = a[i][0] - b[j][0];
        let dy = a[i][1] - b[j][1];
        s2 * (-0.5 * (dx * dx * ix + dy * dy * iy)).exp()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_distance_is_signal_variance() {
        let p = KernelParams::isotropic(1.0, 1.0, 1e-2);
        let k = kernel_matrix(&p, &[[0.0, 0.0]], &[[0.0, 0.0]]);
        assert_eq!(k[(0, 0)], 1.0);
    }

    #[test]
    fn unit_distance() {
        let p = KernelParams::isotropic(1.0, 1.0, 1e-2);
        let k = kernel_matrix(&p, &[[0.0, 0.0]], &[[1.0, 0.0]]);
        assert!((k[(0, 0)] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((k[(0, 0)] - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn anisotropic_hand_value() {
        let p = KernelParams::new(2.0, [1.0, 2.0], 1e-2);
        let pts = [[0.0, 0.0], [3.0, 4.0]];
        let k = kernel_matrix(&p, &pts, &pts);
        let expected = 2.0 * (-6.5f64).exp();
        assert!((k[(0, 1)] - expected).abs() < 1e-15);
        assert_eq!(k[(0, 1)], k[(1, 0)]);
        assert!((k[(1, 1)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn clamp_bounds_log_values() {
        let p = KernelParams::from_array([12.0, -11.0, 0.5, -3.0]).clamped();
        assert_eq!(p.to_array(), [10.0, -10.0, 0.5, -3.0]);
    }
}
