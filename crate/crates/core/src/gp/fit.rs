use std::f64::consts::PI;

use super::dataset::Dataset;
use super::exact::LmlEvaluator;
use super::kernel::{KernelParams, N_PARAMS};
use crate::error::Result;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Adam state for gradient *ascent* with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(dim: usize) -> Self {
        Self { m: vec![0.0; dim], v: vec![0.0; dim], t: 0 }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    /// Advances the moment estimates and returns the parameter increment.
    pub fn step(&mut self, grad: &[f64], lr: f64) -> Vec<f64> {
        assert_eq!(grad.len(), self.m.len(), "gradient dimension mismatch");
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        grad.iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(&g, (m, v))| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                lr * (*m / bc1) / ((*v / bc2).sqrt() + EPS)
            })
            .collect()
    }
}

/// Functional form of [`Adam::step`].
pub fn adam_step(state: &Adam, gradient: &[f64], lr: f64) -> (Adam, Vec<f64>) {
    let mut next = state.clone();
    let delta = next.step(gradient, lr);
    (next, delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// Cosine annealing from the base rate to zero over the run.
    Cosine,
}

impl LrSchedule {
    pub fn rate(&self, base: f64, epoch: usize, epochs: usize) -> f64 {
        match self {
            Self::Constant => base,
            Self::Cosine => 0.5 * base * (1.0 + (PI * epoch as f64 / epochs.max(1) as f64).cos()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub epochs: usize,
    pub lr: f64,
    pub schedule: LrSchedule,
}

impl FitOptions {
    pub fn new(epochs: usize, lr: f64) -> Self {
        Self { epochs, lr, schedule: LrSchedule::Constant }
    }

    pub fn cosine(epochs: usize, lr: f64) -> Self {
        Self { epochs, lr, schedule: LrSchedule::Cosine }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Best parameters seen during the run.
    pub params: KernelParams,
    /// Log marginal likelihood at `params`.
    pub objective: f64,
    /// Objective at every iterate, starting with `params0`.
    pub trace: Vec<f64>,
}

/// Maximizes the log marginal likelihood with Adam in log-parameter space,
/// clamping every iterate to the log bounds and returning the best iterate.
pub fn fit_hyperparams(
    params0: &KernelParams,
    train: &Dataset,
    prior_mean: f64,
    opts: &FitOptions,
) -> Result<FitResult> {
    if train.is_empty() {
        return Ok(FitResult { params: *params0, objective: 0.0, trace: Vec::new() });
    }
    let eval = LmlEvaluator::new(train, prior_mean);
    if opts.epochs == 0 {
        let objective = eval.value(params0)?;
        return Ok(FitResult { params: *params0, objective, trace: vec![objective] });
    }
    let mut adam = Adam::new(N_PARAMS);
    let mut p = params0.clamped();
    let mut best = (f64::NEG_INFINITY, p);
    let mut trace = Vec::with_capacity(opts.epochs + 1);
    for epoch in 0..opts.epochs {
        let (f, g) = eval.value_and_gradient(&p)?;
        trace.push(f);
        if f > best.0 {
            best = (f, p);
        }
        let lr = opts.schedule.rate(opts.lr, epoch, opts.epochs);
        let delta = adam.step(&g, lr);
        let mut v = p.to_array();
        for (x, d) in v.iter_mut().zip(&delta) {
            *x += d;
        }
        p = KernelParams::from_array(v).clamped();
    }
    let f = eval.value(&p)?;
    trace.push(f);
    if f > best.0 {
        best = (f, p);
    }
    Ok(FitResult { params: best.1, objective: best.0, trace })
}
