use std::f64::consts::PI;

use faer::Mat;

use super::dataset::Dataset;
use super::kernel::{kernel_matrix, KernelParams, Point, N_PARAMS};
use crate::error::Result;
use crate::linalg::{col_sq_norms, Cholesky};

/// Marginal Gaussian predictions at a set of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl GaussianPrediction {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn std(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.sqrt()).collect()
    }

    /// Constant prior at every query point.
    pub fn prior(prior_mean: f64, variance: f64, n: usize) -> Self {
        Self { mean: vec![prior_mean; n], variance: vec![variance; n] }
    }
}

/// `K(X, X) + diag(σ² + known noise)`.
fn noisy_covariance(params: &KernelParams, train: &Dataset) -> Mat<f64> {
    let mut c = kernel_matrix(params, train.inputs(), train.inputs());
    let s2n = params.noise_variance();
    for (i, nv) in train.noise_var().into_iter().enumerate() {
        c[(i, i)] += s2n + nv;
    }
    c
}

/// A GP conditioned on a training set: holds the factorized covariance and
/// the weight vector so that many query batches can be predicted cheaply.
pub struct ExactGp {
    params: KernelParams,
    prior_mean: f64,
    inputs: Vec<Point>,
    resid: Vec<f64>,
    alpha: Vec<f64>,
    chol: Option<Cholesky>,
}

impl ExactGp {
    pub fn fit(params: &KernelParams, train: &Dataset, prior_mean: f64) -> Result<Self> {
        let resid: Vec<f64> = train.targets().iter().map(|y| y - prior_mean).collect();
        if train.is_empty() {
            return Ok(Self {
                params: *params,
                prior_mean,
                inputs: Vec::new(),
                resid,
                alpha: Vec::new(),
                chol: None,
            });
        }
        let chol = Cholesky::new(&noisy_covariance(params, train))?;
        let alpha = chol.solve_vec(&resid);
        Ok(Self {
            params: *params,
            prior_mean,
            inputs: train.inputs().to_vec(),
            resid,
            alpha,
            chol: Some(chol),
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn predict(&self, queries: &[Point]) -> GaussianPrediction {
        let s2 = self.params.signal_variance();
        let Some(chol) = &self.chol else {
            return GaussianPrediction::prior(self.prior_mean, s2, queries.len());
        };
        let mut mean = Vec::with_capacity(queries.len());
        let mut variance = Vec::with_capacity(queries.len());
        // bounded memory for full-grid predictions
        for block in queries.chunks(1024) {
            let mut ks = kernel_matrix(&self.params, &self.inputs, block);
            for j in 0..block.len() {
                let col = ks.col_as_slice(j);
                mean.push(self.prior_mean + col.iter().zip(&self.alpha).map(|(k, a)| k * a).sum::<f64>());
            }
            chol.solve_lower_in_place(ks.as_mut());
            for q in col_sq_norms(&ks) {
                let v = s2 - q;
                debug_assert!(v >= -1e-8 * s2.max(1.0), "negative posterior variance {v}");
                variance.push(v.max(0.0));
            }
        }
        GaussianPrediction { mean, variance }
    }

    /// Log marginal likelihood of the conditioning data.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let Some(chol) = &self.chol else { return 0.0 };
        let n = self.resid.len() as f64;
        let fit: f64 = self.resid.iter().zip(&self.alpha).map(|(r, a)| r * a).sum();
        -0.5 * fit - 0.5 * chol.log_det() - 0.5 * n * (2.0 * PI).ln()
    }
}

/// Posterior mean and marginal variance at `queries`.
pub fn gp_posterior(
    params: &KernelParams,
    train: &Dataset,
    queries: &[Point],
    prior_mean: f64,
) -> Result<GaussianPrediction> {
    Ok(ExactGp::fit(params, train, prior_mean)?.predict(queries))
}

pub fn log_marginal_likelihood(params: &KernelParams, train: &Dataset, prior_mean: f64) -> Result<f64> {
    Ok(ExactGp::fit(params, train, prior_mean)?.log_marginal_likelihood())
}

/// Gradient of the log marginal likelihood with respect to the log-scale
/// hyperparameters, in [`KernelParams::to_array`] order.
pub fn lml_gradient(params: &KernelParams, train: &Dataset, prior_mean: f64) -> Result<[f64; N_PARAMS]> {
    Ok(LmlEvaluator::new(train, prior_mean).value_and_gradient(params)?.1)
}

/// Repeated LML/gradient evaluation on a fixed dataset. Pairwise squared
/// distances are computed once.
pub struct LmlEvaluator {
    n: usize,
    dx2: Vec<f64>,
    dy2: Vec<f64>,
    resid: Vec<f64>,
    noise_var: Vec<f64>,
}

impl LmlEvaluator {
    pub fn new(train: &Dataset, prior_mean: f64) -> Self {
        let x = train.inputs();
        let n = x.len();
        let mut dx2 = vec![0.0; n * n];
        let mut dy2 = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dx2[i * n + j] = (x[i][0] - x[j][0]).powi(2);
                dy2[i * n + j] = (x[i][1] - x[j][1]).powi(2);
            }
        }
        Self {
            n,
            dx2,
            dy2,
            resid: train.targets().iter().map(|y| y - prior_mean).collect(),
            noise_var: train.noise_var(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn covariance(&self, params: &KernelParams) -> Mat<f64> {
        let n = self.n;
        let s2 = params.signal_variance();
        let [lx, ly] = params.lengthscale();
        let (ix, iy) = (1.0 / (lx * lx), 1.0 / (ly * ly));
        let s2n = params.noise_variance();
        Mat::from_fn(n, n, |i, j| {
            let k = s2 * (-0.5 * (self.dx2[i * n + j] * ix + self.dy2[i * n + j] * iy)).exp();
            if i == j {
                k + s2n + self.noise_var[i]
            } else {
                k
            }
        })
    }

    pub fn value(&self, params: &KernelParams) -> Result<f64> {
        let chol = Cholesky::new(&self.covariance(params))?;
        let alpha = chol.solve_vec(&self.resid);
        Ok(self.lml(&chol, &alpha))
    }

    fn lml(&self, chol: &Cholesky, alpha: &[f64]) -> f64 {
        let fit: f64 = self.resid.iter().zip(alpha).map(|(r, a)| r * a).sum();
        -0.5 * fit - 0.5 * chol.log_det() - 0.5 * self.n as f64 * (2.0 * PI).ln()
    }

    /// LML and its gradient via `½ tr((ααᵀ - C⁻¹) ∂C/∂θ)`.
    pub fn value_and_gradient(&self, params: &KernelParams) -> Result<(f64, [f64; N_PARAMS])> {
        let n = self.n;
        let c = self.covariance(params);
        let chol = Cholesky::new(&c)?;
        let alpha = chol.solve_vec(&self.resid);
        let value = self.lml(&chol, &alpha);
        let cinv = chol.inverse();
        let s2 = params.signal_variance();
        let [lx, ly] = params.lengthscale();
        let (ix, iy) = (1.0 / (lx * lx), 1.0 / (ly * ly));
        let mut g = [0.0; N_PARAMS];
        for j in 0..n {
            let cinv_col = cinv.col_as_slice(j);
            let c_col = c.col_as_slice(j);
            for i in 0..n {
                let w = alpha[i] * alpha[j] - cinv_col[i];
                let k = if i == j { s2 } else { c_col[i] };
                let wk = w * k;
                g[0] += wk;
                g[1] += wk * self.dx2[i * n + j] * ix;
                g[2] += wk * self.dy2[i * n + j] * iy;
            }
            g[3] += alpha[j] * alpha[j] - cinv_col[j];
        }
        g[3] *= params.noise_variance();
        Ok((value, g.map(|v| 0.5 * v)))
    }
}
