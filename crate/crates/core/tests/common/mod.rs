//! Dense reference implementations shared by the integration tests. They
//! use plain Gauss-Jordan elimination on nested vectors so that they share
//! no code with the library.
#![allow(dead_code)]

use gprelay_core::gp::{Dataset, KernelParams, Point};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn se(p: &KernelParams, a: Point, b: Point) -> f64 {
    let s2 = p.log_signal_variance.exp();
    let lx = p.log_lengthscale[0].exp();
    let ly = p.log_lengthscale[1].exp();
    let d = ((a[0] - b[0]) / lx).powi(2) + ((a[1] - b[1]) / ly).powi(2);
    s2 * (-0.5 * d).exp()
}

pub fn gram(p: &KernelParams, a: &[Point], b: &[Point]) -> Dense {
    a.iter().map(|&x| b.iter().map(|&y| se(p, x, y)).collect()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let k = b.len();
    let m = if k == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| (0..m).map(|j| (0..k).map(|t| row[t] * b[t][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &Dense) -> Dense {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn matvec(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inverse and log-determinant by Gauss-Jordan with partial pivoting.
pub fn inverse_logdet(a: &Dense) -> (Dense, f64) {
    let n = a.len();
    let mut m: Dense = a.clone();
    let mut inv: Dense = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut logdet = 0.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        inv.swap(col, piv);
        let d = m[col][col];
        logdet += d.abs().ln();
        for j in 0..n {
            m[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        m[i][j] -= f * m[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    (inv, logdet)
}

/// `K(X, X) + diag(σ² + s_i²)`.
pub fn noisy_gram(p: &KernelParams, d: &Dataset) -> Dense {
    let mut k = gram(p, d.inputs(), d.inputs());
    let nv = d.noise_var();
    for i in 0..k.len() {
        k[i][i] += p.log_noise_variance.exp() + nv[i];
    }
    k
}

/// Posterior mean and latent variance by conditioning the joint Gaussian.
pub fn dense_posterior(p: &KernelParams, d: &Dataset, q: &[Point], mean: f64) -> (Vec<f64>, Vec<f64>) {
    let (kinv, _) = inverse_logdet(&noisy_gram(p, d));
    let r: Vec<f64> = d.targets().iter().map(|y| y - mean).collect();
    let alpha = matvec(&kinv, &r);
    let ks = gram(p, q, d.inputs());
    let mu = ks.iter().map(|row| mean + dot(row, &alpha)).collect();
    let var = ks
        .iter()
        .zip(q)
        .map(|(row, &x)| se(p, x, x) - dot(row, &matvec(&kinv, row)))
        .collect();
    (mu, var)
}

pub fn dense_lml(p: &KernelParams, d: &Dataset, mean: f64) -> f64 {
    let (kinv, logdet) = inverse_logdet(&noisy_gram(p, d));
    let r: Vec<f64> = d.targets().iter().map(|y| y - mean).collect();
    let n = r.len() as f64;
    -0.5 * dot(&r, &matvec(&kinv, &r)) - 0.5 * logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// Titsias bound computed as `log N(y | μ, Q + Λ) - ½ tr(Λ⁻¹ (K - Q))` with
/// `Q = K_XZ K_ZZ⁻¹ K_ZX`.
pub fn dense_elbo(p: &KernelParams, d: &Dataset, z: &[Point], mean: f64) -> f64 {
    let x = d.inputs();
    let n = x.len();
    let (kzz_inv, _) = inverse_logdet(&gram(p, z, z));
    let kxz = gram(p, x, z);
    let q = matmul(&matmul(&kxz, &kzz_inv), &transpose(&kxz));
    let lam: Vec<f64> = d.noise_var().iter().map(|v| v + p.log_noise_variance.exp()).collect();
    let mut cov = q.clone();
    for i in 0..n {
        cov[i][i] += lam[i];
    }
    let (cinv, logdet) = inverse_logdet(&cov);
    let r: Vec<f64> = d.targets().iter().map(|y| y - mean).collect();
    let trace: f64 = (0..n).map(|i| (se(p, x[i], x[i]) - q[i][i]) / lam[i]).sum();
    -0.5 * dot(&r, &matvec(&cinv, &r))
        - 0.5 * logdet
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
        - 0.5 * trace
}

pub fn random_params(rng: &mut ChaCha8Rng) -> KernelParams {
    KernelParams::new(
        rng.random_range(0.05..1.0),
        [rng.random_range(0.8..5.0), rng.random_range(0.8..5.0)],
        rng.random_range(1e-4..0.05),
    )
}

/// Distinct integer grid locations in a 12x12 box with random targets and
/// mixed per-point noise.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize) -> Dataset {
    let mut d = Dataset::new();
    while d.len() < n {
        let x = [rng.random_range(0..12) as f64, rng.random_range(0..12) as f64];
        let s = if rng.random_bool(0.5) { 0.01 } else { 0.05 };
        d.push(x, rng.random_range(0.0..1.0), s);
    }
    d
}

/// Cheapest start-to-goal cost over all simple 4-connected paths, by
/// depth-first enumeration; the start cell itself is free.
pub fn exhaustive_min_cost(w: usize, h: usize, cost: &[f64], start: (usize, usize), goal: (usize, usize)) -> f64 {
    fn dfs(
        w: usize,
        h: usize,
        cost: &[f64],
        at: (usize, usize),
        goal: (usize, usize),
        seen: &mut Vec<bool>,
        acc: f64,
        best: &mut f64,
    ) {
        if at == goal {
            *best = best.min(acc);
            return;
        }
        let (x, y) = (at.0 as i64, at.1 as i64);
        for (nx, ny) in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let i = ny as usize * w + nx as usize;
            if seen[i] {
                continue;
            }
            seen[i] = true;
            dfs(w, h, cost, (nx as usize, ny as usize), goal, seen, acc + cost[i], best);
            seen[i] = false;
        }
    }
    let mut seen = vec![false; w * h];
    seen[start.1 * w + start.0] = true;
    let mut best = f64::INFINITY;
    dfs(w, h, cost, start, goal, &mut seen, 0.0, &mut best);
    best
}
