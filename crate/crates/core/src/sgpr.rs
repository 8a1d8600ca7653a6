//! Collapsed sparse GP regression: the variational lower bound on the
//! marginal likelihood, the optimal Gaussian over inducing values, and the
//! sparse predictive.
//!
//! The known per-point measurement noise makes the likelihood
//! heteroscedastic, `Λ = diag(σ² + noise_i)`. With uniform noise every
//! expression below reduces to the usual homoscedastic form.

use std::collections::HashSet;
use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};
use crate::gp::{kernel_matrix, Dataset, GaussianPrediction, KernelParams, Point};
use crate::linalg::{col_sq_norms, symmetrize, Cholesky};

/// Inducing input locations `Z` (nonempty, distinct).
#[derive(Debug, Clone, PartialEq)]
pub struct InducingSet {
    locations: Vec<Point>,
}

impl InducingSet {
    pub fn new(locations: Vec<Point>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::InvalidConfig("inducing set must be nonempty".into()));
        }
        let mut seen = HashSet::new();
        for p in &locations {
            if !seen.insert(((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())) {
                return Err(Error::InvalidConfig(format!("duplicate inducing location {p:?}")));
            }
        }
        Ok(Self { locations })
    }

    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// `q(u) = N(mean, cov)` over the (centered) inducing values.
#[derive(Debug, Clone)]
pub struct VariationalGaussian {
    pub mean: Vec<f64>,
    pub cov: Mat<f64>,
}

impl VariationalGaussian {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Intermediate factors shared by the bound and the optimal `q(u)`.
struct Collapsed {
    lz: Cholesky,
    lb: Cholesky,
    c: Vec<f64>,
    elbo: f64,
}

/// Evaluates the collapsed bound from `K_ZZ`, `K_ZX`, the prior diagonal
/// `k(x, x) = s2`, centered targets and total noise variances.
fn collapse(kzz: &Mat<f64>, mut kzx: Mat<f64>, s2: f64, resid: &[f64], lam: &[f64]) -> Result<Collapsed> {
    let m = kzz.nrows();
    let n = resid.len();
    let lz = Cholesky::new(kzz)?;
    lz.solve_lower_in_place(kzx.as_mut());
    // scale column i by Λ_i^{-1/2}
    for (i, l) in lam.iter().enumerate() {
        let s = 1.0 / l.sqrt();
        kzx.col_as_slice_mut(i).iter_mut().for_each(|v| *v *= s);
    }
    let a = kzx;
    let mut b = &a * a.transpose();
    for i in 0..m {
        b[(i, i)] += 1.0;
    }
    let lb = Cholesky::new(&b)?;
    let r: Vec<f64> = resid.iter().zip(lam).map(|(y, l)| y / l.sqrt()).collect();
    let ar: Vec<f64> = (0..m)
        .map(|i| (0..n).map(|j| a[(i, j)] * r[j]).sum())
        .collect();
    let c = lb.half_solve_vec(&ar);
    let rr: f64 = r.iter().map(|v| v * v).sum();
    let cc: f64 = c.iter().map(|v| v * v).sum();
    let log_lam: f64 = lam.iter().map(|l| l.ln()).sum();
    let trace_q: f64 = col_sq_norms(&a).iter().sum();
    let trace_k: f64 = lam.iter().map(|l| s2 / l).sum();
    let elbo = -0.5 * n as f64 * (2.0 * PI).ln()
        - 0.5 * log_lam
        - 0.5 * lb.log_det()
        - 0.5 * (rr - cc)
        - 0.5 * (trace_k - trace_q);
    Ok(Collapsed { lz, lb, c, elbo })
}

fn total_noise(params: &KernelParams, train: &Dataset) -> Vec<f64> {
    let s2n = params.noise_variance();
    train.noise_var().into_iter().map(|v| v + s2n).collect()
}

fn centered(train: &Dataset, prior_mean: f64) -> Vec<f64> {
    train.targets().iter().map(|y| y - prior_mean).collect()
}

fn collapse_dataset(params: &KernelParams, train: &Dataset, z: &InducingSet, prior_mean: f64) -> Result<Collapsed> {
    let kzz = kernel_matrix(params, z.locations(), z.locations());
    let kzx = kernel_matrix(params, z.locations(), train.inputs());
    collapse(&kzz, kzx, params.signal_variance(), &centered(train, prior_mean), &total_noise(params, train))
}

/// Collapsed evidence lower bound `log N(y | μ, Q + Λ) - ½ tr(Λ⁻¹(K - Q))`.
pub fn sgpr_elbo(params: &KernelParams, train: &Dataset, z: &InducingSet, prior_mean: f64) -> Result<f64> {
    Ok(collapse_dataset(params, train, z, prior_mean)?.elbo)
}

/// Optimal `q(u)`: mean `K_ZZ A K_ZX Λ⁻¹ (y - μ)`, covariance `K_ZZ A K_ZZ`
/// with `A = (K_ZZ + K_ZX Λ⁻¹ K_XZ)⁻¹`.
pub fn sgpr_variational(
    params: &KernelParams,
    train: &Dataset,
    z: &InducingSet,
    prior_mean: f64,
) -> Result<VariationalGaussian> {
    let col = collapse_dataset(params, train, z, prior_mean)?;
    Ok(variational_from(&col))
}

fn variational_from(col: &Collapsed) -> VariationalGaussian {
    // K_ZZ A = Lz B⁻¹ Lz⁻¹, so with W = Lz Lb⁻ᵀ: S = W Wᵀ and mean = W c
    let mut wt = col.lz.l().transpose().to_owned();
    col.lb.solve_lower_in_place(wt.as_mut());
    let m = wt.nrows();
    let mean = (0..m)
        .map(|i| (0..m).map(|k| wt[(k, i)] * col.c[k]).sum())
        .collect();
    let mut cov = wt.transpose() * &wt;
    symmetrize(&mut cov);
    VariationalGaussian { mean, cov }
}

/// Sparse predictive with inducing inputs `Z` and variational `q(u)`.
pub fn sgpr_predict(
    params: &KernelParams,
    z: &InducingSet,
    q: &VariationalGaussian,
    queries: &[Point],
    prior_mean: f64,
) -> Result<GaussianPrediction> {
    if q.dim() != z.len() || q.cov.nrows() != z.len() || q.cov.ncols() != z.len() {
        return Err(Error::InvalidConfig(format!(
            "variational dimension {} does not match {} inducing points",
            q.dim(),
            z.len()
        )));
    }
    let s2 = params.signal_variance();
    let lz = Cholesky::new(&kernel_matrix(params, z.locations(), z.locations()))?;
    let mut mean = Vec::with_capacity(queries.len());
    let mut variance = Vec::with_capacity(queries.len());
    for block in queries.chunks(1024) {
        let mut v = kernel_matrix(params, z.locations(), block);
        lz.solve_lower_in_place(v.as_mut());
        let qdiag = col_sq_norms(&v);
        let mut proj = v;
        lz.solve_upper_in_place(proj.as_mut());
        // proj = K_ZZ⁻¹ K_Z*
        let sp = &q.cov * &proj;
        for (j, &qd) in qdiag.iter().enumerate() {
            let pj = proj.col_as_slice(j);
            let mu: f64 = pj.iter().zip(&q.mean).map(|(a, b)| a * b).sum();
            let quad: f64 = pj.iter().zip(sp.col_as_slice(j)).map(|(a, b)| a * b).sum();
            mean.push(prior_mean + mu);
            variance.push((s2 - qd + quad).max(0.0));
        }
    }
    Ok(GaussianPrediction { mean, variance })
}

/// Bound evaluations for many subsets of a fixed candidate pool against a
/// fixed training set. Kernel blocks are computed once and sliced per
/// subset.
pub struct ElboCache {
    kcc: Mat<f64>,
    kcx: Mat<f64>,
    s2: f64,
    resid: Vec<f64>,
    lam: Vec<f64>,
}

impl ElboCache {
    pub fn new(params: &KernelParams, train: &Dataset, candidates: &[Point], prior_mean: f64) -> Self {
        Self {
            kcc: kernel_matrix(params, candidates, candidates),
            kcx: kernel_matrix(params, candidates, train.inputs()),
            s2: params.signal_variance(),
            resid: centered(train, prior_mean),
            lam: total_noise(params, train),
        }
    }

    pub fn n_candidates(&self) -> usize {
        self.kcc.nrows()
    }

    /// Bound with `Z` = the candidates at `subset` (indices, any order).
    pub fn elbo(&self, subset: &[usize]) -> Result<f64> {
        let kzz = Mat::from_fn(subset.len(), subset.len(), |i, j| self.kcc[(subset[i], subset[j])]);
        let kzx = Mat::from_fn(subset.len(), self.kcx.ncols(), |i, j| self.kcx[(subset[i], j)]);
        Ok(collapse(&kzz, kzx, self.s2, &self.resid, &self.lam)?.elbo)
    }
}
