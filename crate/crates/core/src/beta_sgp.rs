//! Task-aware inducing-point selection.
//!
//! Each candidate location carries an inclusion probability; subsets are
//! drawn from the resulting independent Bernoulli process. The objective is
//! the expected collapsed bound over subsets minus `β` times the KL from the
//! Bernoulli process to an i.i.d. RoI prior over locations. The expectation
//! is differentiated with the score-function estimator, using a decaying
//! average of sampled bounds as the baseline; the KL term is differentiated
//! analytically. The transmitted set is the top-`m*` candidates by
//! inclusion probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::{Adam, Dataset, KernelParams, Point, N_PARAMS};
use crate::roi::RoiGaussian;
use crate::sgpr::ElboCache;

/// Inclusion probabilities live in `[LAMBDA_MIN, 1 - LAMBDA_MIN]`.
pub const LAMBDA_MIN: f64 = 1e-4;
pub const BASELINE_DECAY: f64 = 0.9;
/// Redraws allowed before an empty draw falls back to the top candidate.
pub const MAX_RESAMPLES: usize = 20;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logit_bound() -> f64 {
    logit(1.0 - LAMBDA_MIN)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for Monte-Carlo sample `sample` of epoch `epoch`; independent of the
/// evaluation schedule.
pub fn sub_seed(seed: u64, epoch: u64, sample: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ epoch) ^ sample)
}

/// Bernoulli point process over a candidate set, with its optimizer state.
#[derive(Debug, Clone)]
pub struct VariationalSelection {
    candidates: Vec<Point>,
    logits: Vec<f64>,
    pub beta: f64,
    pub budget: usize,
    pub mc_samples: usize,
    pub baseline: Option<f64>,
    pub rng_seed: u64,
    adam: Adam,
    epochs_done: u64,
}

impl VariationalSelection {
    /// All inclusion probabilities start at 0.5.
    pub fn new(candidates: Vec<Point>, beta: f64, budget: usize, mc_samples: usize, rng_seed: u64) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidConfig("selection needs at least one candidate".into()));
        }
        if beta.is_nan() || beta < 1.0 {
            return Err(Error::InvalidConfig(format!("beta must be >= 1, got {beta}")));
        }
        if mc_samples == 0 {
            return Err(Error::InvalidConfig("need at least one Monte-Carlo sample".into()));
        }
        let n = candidates.len();
        Ok(Self {
            candidates,
            logits: vec![0.0; n],
            beta,
            budget,
            mc_samples,
            baseline: None,
            rng_seed,
            adam: Adam::new(n),
            epochs_done: 0,
        })
    }

    pub fn candidates(&self) -> &[Point] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn lambda(&self) -> Vec<f64> {
        self.logits.iter().map(|&l| sigmoid(l).clamp(LAMBDA_MIN, 1.0 - LAMBDA_MIN)).collect()
    }

    pub fn set_lambda(&mut self, lambda: &[f64]) {
        assert_eq!(lambda.len(), self.logits.len(), "lambda length mismatch");
        self.logits = lambda.iter().map(|&p| logit(p.clamp(LAMBDA_MIN, 1.0 - LAMBDA_MIN))).collect();
    }

    pub fn epochs_done(&self) -> u64 {
        self.epochs_done
    }
}

/// Per-candidate cross-entropy coefficient `-log N(z_i | μ_p, Σ_p)`.
pub fn cross_entropy_coeffs(candidates: &[Point], roi: &RoiGaussian) -> Vec<f64> {
    candidates.iter().map(|&z| -roi.log_density(z)).collect()
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// KL for arbitrary inclusion probabilities in `[0, 1]` given the
/// per-candidate coefficients from [`cross_entropy_coeffs`].
pub fn kl_divergence(lambda: &[f64], ce: &[f64]) -> f64 {
    lambda
        .iter()
        .zip(ce)
        .map(|(&l, &c)| xlogx(l) + xlogx(1.0 - l) + l * c)
        .sum()
}

/// `KL(q_λ ‖ p)` as cross-entropy minus entropy, keeping the
/// λ-dependent normalization `λ_i (log 2π + ½ log|Σ_p|)`.
pub fn kl_bernoulli_vs_roi(sel: &VariationalSelection, roi: &RoiGaussian) -> f64 {
    kl_divergence(&sel.lambda(), &cross_entropy_coeffs(&sel.candidates, roi))
}

fn kl_gradient(lambda: &[f64], ce: &[f64]) -> Vec<f64> {
    lambda.iter().zip(ce).map(|(&l, &c)| logit(l) + c).collect()
}

fn draw_mask<R: Rng>(lambda: &[f64], rng: &mut R) -> Vec<bool> {
    for _ in 0..=MAX_RESAMPLES {
        let mask: Vec<bool> = lambda.iter().map(|&l| rng.random::<f64>() < l).collect();
        if mask.iter().any(|&b| b) {
            return mask;
        }
    }
    let mut best = 0;
    for (i, &l) in lambda.iter().enumerate() {
        if l > lambda[best] {
            best = i;
        }
    }
    let mut mask = vec![false; lambda.len()];
    mask[best] = true;
    mask
}

/// Draws an inclusion mask. An empty draw is redrawn up to
/// [`MAX_RESAMPLES`] times, then replaced by the single most probable
/// candidate.
pub fn sample_subset<R: Rng>(sel: &VariationalSelection, rng: &mut R) -> Vec<bool> {
    draw_mask(&sel.lambda(), rng)
}

/// Score-function gradient of `E[F₁]` with respect to λ.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGradient {
    pub grad: Vec<f64>,
    /// Baseline after the decaying-average update.
    pub baseline: f64,
}

/// `mean_s (F₁(s) - b) ∇_λ log q_λ(mask_s)`; the baseline starts at the first
/// batch mean and then decays as `b ← ρ b + (1 - ρ) mean(F₁)`.
pub fn score_gradient(sel: &VariationalSelection, samples: &[(Vec<bool>, f64)]) -> ScoreGradient {
    score_gradient_for(&sel.lambda(), sel.baseline, samples)
}

fn score_gradient_for(lambda: &[f64], baseline: Option<f64>, samples: &[(Vec<bool>, f64)]) -> ScoreGradient {
    assert!(!samples.is_empty(), "score gradient needs at least one sample");
    let s = samples.len() as f64;
    let batch_mean = samples.iter().map(|(_, f)| f).sum::<f64>() / s;
    let b = baseline.unwrap_or(batch_mean);
    let mut grad = vec![0.0; lambda.len()];
    for (mask, f) in samples {
        let adv = f - b;
        for ((g, &inc), &l) in grad.iter_mut().zip(mask).zip(lambda) {
            *g += if inc { adv / l } else { -adv / (1.0 - l) };
        }
    }
    grad.iter_mut().for_each(|g| *g /= s);
    ScoreGradient { grad, baseline: BASELINE_DECAY * b + (1.0 - BASELINE_DECAY) * batch_mean }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOptions {
    pub epochs: usize,
    pub lr: f64,
    /// Also ascend the bound in the kernel hyperparameters.
    pub joint_hyperparams: bool,
    pub hyperparam_lr: f64,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self { epochs: 100, lr: 0.3, joint_hyperparams: false, hyperparam_lr: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// Mean collapsed bound over the successfully evaluated samples.
    pub mean_f1: f64,
    /// KL at the λ used for sampling.
    pub kl: f64,
    /// `mean_f1 - β kl`.
    pub f2: f64,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub trace: Vec<EpochStats>,
    /// Hyperparameters after the run (unchanged unless jointly optimized).
    pub params: KernelParams,
}

fn subset_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
}

/// Draws and evaluates one epoch of Monte-Carlo samples. Factorization
/// failures come back as `None`.
fn evaluate_samples(
    cache: &ElboCache,
    lambda: &[f64],
    seed: u64,
    epoch: u64,
    n: usize,
) -> Result<Vec<(Vec<bool>, Option<f64>)>> {
    (0..n)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, epoch, s as u64));
            let mask = draw_mask(lambda, &mut rng);
            match cache.elbo(&subset_indices(&mask)) {
                Ok(f) => Ok((mask, Some(f))),
                Err(Error::FactorizationFailure { .. }) => Ok((mask, None)),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Ascends `E_q[F₁] - β KL(q_λ ‖ p)` with Adam on the logits of λ.
pub fn optimize_selection(
    sel: &mut VariationalSelection,
    params: &KernelParams,
    train: &Dataset,
    roi: &RoiGaussian,
    prior_mean: f64,
    opts: &SelectionOptions,
) -> Result<SelectionReport> {
    let ce = cross_entropy_coeffs(&sel.candidates, roi);
    let mut params = *params;
    let mut cache = ElboCache::new(&params, train, &sel.candidates, prior_mean);
    let mut theta_adam = Adam::new(N_PARAMS);
    let bound = logit_bound();
    let mut trace = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        let epoch = sel.epochs_done;
        let lambda = sel.lambda();
        let evaluated = evaluate_samples(&cache, &lambda, sel.rng_seed, epoch, sel.mc_samples)?;
        let total = evaluated.len();
        let samples: Vec<(Vec<bool>, f64)> =
            evaluated.into_iter().filter_map(|(m, f)| f.map(|f| (m, f))).collect();
        let failures = total - samples.len();
        if failures * 2 > total {
            return Err(Error::DegenerateCandidates { failed: failures, total });
        }
        let score = score_gradient_for(&lambda, sel.baseline, &samples);
        let kl = kl_divergence(&lambda, &ce);
        let mean_f1 = samples.iter().map(|(_, f)| f).sum::<f64>() / samples.len() as f64;
        trace.push(EpochStats { mean_f1, kl, f2: mean_f1 - sel.beta * kl, failures });

        let klg = kl_gradient(&lambda, &ce);
        let logit_grad: Vec<f64> = lambda
            .iter()
            .zip(score.grad.iter().zip(&klg))
            .map(|(&l, (&g, &k))| (g - sel.beta * k) * l * (1.0 - l))
            .collect();
        let delta = sel.adam.step(&logit_grad, opts.lr);
        for (x, d) in sel.logits.iter_mut().zip(delta) {
            *x = (*x + d).clamp(-bound, bound);
        }
        sel.baseline = Some(score.baseline);
        sel.epochs_done += 1;

        if opts.joint_hyperparams {
            let g = hyperparam_gradient(&params, train, &sel.candidates, prior_mean, &samples)?;
            let step = theta_adam.step(&g, opts.hyperparam_lr);
            let mut v = params.to_array();
            v.iter_mut().zip(step).for_each(|(x, d)| *x += d);
            params = KernelParams::from_array(v).clamped();
            cache = ElboCache::new(&params, train, &sel.candidates, prior_mean);
        }
    }
    Ok(SelectionReport { trace, params })
}

/// Central finite-difference estimate of `∇_θ mean_s F₁(Z_s)` over the
/// epoch's samples.
fn hyperparam_gradient(
    params: &KernelParams,
    train: &Dataset,
    candidates: &[Point],
    prior_mean: f64,
    samples: &[(Vec<bool>, f64)],
) -> Result<[f64; N_PARAMS]> {
    const H: f64 = 1e-4;
    let mut g = [0.0; N_PARAMS];
    for (k, gk) in g.iter_mut().enumerate() {
        let mean_at = |sign: f64| -> Result<f64> {
            let mut v = params.to_array();
            v[k] += sign * H;
            let cache = ElboCache::new(&KernelParams::from_array(v), train, candidates, prior_mean);
            let mut acc = 0.0;
            for (mask, _) in samples {
                acc += cache.elbo(&subset_indices(mask))?;
            }
            Ok(acc / samples.len() as f64)
        };
        *gk = (mean_at(1.0)? - mean_at(-1.0)?) / (2.0 * H);
    }
    Ok(g)
}

/// Indices of the `m*` candidates with the largest inclusion probability.
/// Ties go to the smaller Mahalanobis distance to the RoI mean, then to the
/// lower index.
pub fn extract_transmitted(sel: &VariationalSelection, roi: &RoiGaussian) -> Result<Vec<usize>> {
    if sel.budget > sel.len() {
        return Err(Error::BudgetExceedsCandidates { budget: sel.budget, candidates: sel.len() });
    }
    let lambda = sel.lambda();
    let maha: Vec<f64> = sel.candidates.iter().map(|&z| roi.mahalanobis2(z)).collect();
    let mut order: Vec<usize> = (0..sel.len()).collect();
    order.sort_by(|&a, &b| {
        lambda[b]
            .total_cmp(&lambda[a])
            .then(maha[a].total_cmp(&maha[b]))
            .then(a.cmp(&b))
    });
    order.truncate(sel.budget);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roi::roi_path_agnostic;
    use std::f64::consts::PI;

    fn sel_with(lambda: &[f64], cands: Vec<Point>) -> VariationalSelection {
        let mut s = VariationalSelection::new(cands, 1.0, 1, 4, 0).unwrap();
        s.set_lambda(lambda);
        s
    }

    #[test]
    fn kl_hand_values() {
        let roi = roi_path_agnostic([0.0, 0.0], 1.0).unwrap();
        let s = sel_with(&[1.0, 1.0], vec![[0.0, 0.0], [0.0, 0.0]]);
        // clamping λ leaves a residue of a few 1e-3
        assert!((kl_bernoulli_vs_roi(&s, &roi) - 2.0 * (2.0 * PI).ln()).abs() < 5e-3);
        let exact = kl_divergence(&[1.0, 1.0], &cross_entropy_coeffs(s.candidates(), &roi));
        assert!((exact - 3.67576).abs() < 1e-5);
        let s = sel_with(&[0.5], vec![[0.0, 0.0]]);
        assert!((kl_bernoulli_vs_roi(&s, &roi) - (0.5 * (2.0 * PI).ln() - 2f64.ln())).abs() < 1e-12);
        assert!((kl_bernoulli_vs_roi(&s, &roi) - 0.22579).abs() < 1e-5);
        let ce = cross_entropy_coeffs(&[[1.0, 0.0]], &roi);
        assert!((kl_divergence(&[1.0], &ce) - ((2.0 * PI).ln() + 0.5)).abs() < 1e-12);
        assert!((kl_divergence(&[1.0], &ce) - 2.33788).abs() < 1e-5);
    }

    #[test]
    fn centered_single_sample_has_zero_gradient() {
        let mut s = sel_with(&[0.3, 0.6], vec![[0.0, 0.0], [1.0, 0.0]]);
        s.baseline = Some(-4.0);
        let g = score_gradient(&s, &[(vec![true, false], -4.0)]);
        assert_eq!(g.grad, vec![0.0, 0.0]);
    }

    #[test]
    fn half_probability_doubles_advantage() {
        let mut s = sel_with(&[0.5, 0.5], vec![[0.0, 0.0], [1.0, 0.0]]);
        s.baseline = Some(1.0);
        let g = score_gradient(&s, &[(vec![true, false], 3.5)]);
        assert!((g.grad[0] - 5.0).abs() < 1e-12);
        assert!((g.grad[1] + 5.0).abs() < 1e-12);
        assert!((g.baseline - (0.9 + 0.1 * 3.5)).abs() < 1e-12);
    }

    #[test]
    fn first_batch_initializes_baseline() {
        let s = sel_with(&[0.5], vec![[0.0, 0.0]]);
        let g = score_gradient(&s, &[(vec![true], 2.0), (vec![false], 4.0)]);
        assert_eq!(g.baseline, 3.0);
        // (2-3)/0.5 and -(4-3)/0.5, averaged
        assert!((g.grad[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn low_probability_draws_are_never_empty() {
        let s = sel_with(&[LAMBDA_MIN; 6], (0..6).map(|i| [i as f64, 0.0]).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = sample_subset(&s, &mut rng);
            assert!(m.iter().any(|&b| b));
        }
    }

    #[test]
    fn near_certain_draws_include_everything() {
        let s = sel_with(&[1.0; 5], (0..5).map(|i| [i as f64, 0.0]).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let full = (0..100).filter(|_| sample_subset(&s, &mut rng).iter().all(|&b| b)).count();
        assert!(full >= 99);
    }

    #[test]
    fn extraction_order_and_ties() {
        let roi = roi_path_agnostic([0.0, 0.0], 1.0).unwrap();
        let mut s = sel_with(&[0.9, 0.1, 0.8], vec![[5.0, 0.0], [0.0, 0.0], [1.0, 1.0]]);
        s.budget = 2;
        let mut got = extract_transmitted(&s, &roi).unwrap();
        got.sort();
        assert_eq!(got, vec![0, 2]);

        let mut s = sel_with(&[0.4; 3], vec![[5.0, 0.0], [2.0, 0.0], [1.0, 1.0]]);
        s.budget = 1;
        assert_eq!(extract_transmitted(&s, &roi).unwrap(), vec![2]);
        s.budget = 3;
        assert_eq!(extract_transmitted(&s, &roi).unwrap().len(), 3);
        s.budget = 4;
        assert!(matches!(extract_transmitted(&s, &roi), Err(Error::BudgetExceedsCandidates { .. })));
    }

    #[test]
    fn sub_seeds_differ() {
        assert_ne!(sub_seed(1, 0, 0), sub_seed(1, 0, 1));
        assert_ne!(sub_seed(1, 0, 1), sub_seed(1, 1, 0));
        assert_eq!(sub_seed(9, 4, 2), sub_seed(9, 4, 2));
    }
}
