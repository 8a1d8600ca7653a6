//! Thin layer over `faer` for the dense symmetric solves used by every GP
//! routine in the crate.

use faer::linalg::solvers::{DenseSolveCore, Llt};
use faer::{Mat, MatMut, Side};

use crate::error::{Error, Result};

/// Relative jitter ladder applied after an unjittered attempt fails.
const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-2;

/// Cholesky factor of a symmetric positive definite matrix, together with the
/// diagonal jitter that was needed to obtain it.
pub struct Cholesky {
    llt: Llt<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Factorizes `a`, escalating diagonal jitter from `1e-8` to `1e-2` times
    /// the mean diagonal (x10 per attempt) when the plain factorization fails.
    pub fn new(a: &Mat<f64>) -> Result<Self> {
        let n = a.nrows();
        if let Ok(llt) = a.llt(Side::Lower) {
            if factor_is_finite(&llt) {
                return Ok(Self { llt, jitter: 0.0 });
            }
        }
        let mean_diag = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n.max(1) as f64;
        let scale = if mean_diag.is_finite() && mean_diag > 0.0 { mean_diag } else { 1.0 };
        let mut rel = JITTER_START;
        let mut jitter = 0.0;
        while rel <= JITTER_MAX * (1.0 + 1e-9) {
            jitter = rel * scale;
            let mut b = a.clone();
            for i in 0..n {
                b[(i, i)] += jitter;
            }
            if let Ok(llt) = b.llt(Side::Lower) {
                if factor_is_finite(&llt) {
                    return Ok(Self { llt, jitter });
                }
            }
            rel *= 10.0;
        }
        Err(Error::FactorizationFailure { dim: n, jitter })
    }

    pub fn dim(&self) -> usize {
        self.llt.L().nrows()
    }

    /// Diagonal jitter added before factorization succeeded (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn l(&self) -> faer::MatRef<'_, f64> {
        self.llt.L()
    }

    /// `log |A|` from the factor diagonal.
    pub fn log_det(&self) -> f64 {
        let l = self.llt.L();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// Overwrites `rhs` with `L^{-1} rhs`.
    pub fn solve_lower_in_place(&self, rhs: MatMut<'_, f64>) {
        self.llt.L().solve_lower_triangular_in_place(rhs);
    }

    /// Overwrites `rhs` with `L^{-T} rhs`.
    pub fn solve_upper_in_place(&self, rhs: MatMut<'_, f64>) {
        self.llt.L().transpose().solve_upper_triangular_in_place(rhs);
    }

    /// `A^{-1} b` for a single right-hand side.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = col_from_slice(b);
        self.solve_lower_in_place(rhs.as_mut());
        self.solve_upper_in_place(rhs.as_mut());
        rhs.col_as_slice(0).to_vec()
    }

    /// `L^{-1} b` for a single right-hand side.
    pub fn half_solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = col_from_slice(b);
        self.solve_lower_in_place(rhs.as_mut());
        rhs.col_as_slice(0).to_vec()
    }

    /// Dense symmetric inverse of the factorized (jittered) matrix.
    pub fn inverse(&self) -> Mat<f64> {
        self.llt.inverse()
    }
}

fn factor_is_finite(llt: &Llt<f64>) -> bool {
    let l = llt.L();
    (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.is_finite() && d > 0.0
    })
}

pub(crate) fn col_from_slice(b: &[f64]) -> Mat<f64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

/// Squared Euclidean norm of each column.
pub(crate) fn col_sq_norms(m: &Mat<f64>) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| m.col_as_slice(j).iter().map(|v| v * v).sum())
        .collect()
}

pub(crate) fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
