//! Stationary-Sensor sweep over β and the point budget: the Sensor observes
//! the whole map once, selects points with β-SGP and the receiver rebuilds
//! the map from the selected points alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beta_sgp::{extract_transmitted, optimize_selection, sub_seed, SelectionOptions, VariationalSelection};
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparams, Dataset, FitOptions, GaussianPrediction, KernelParams, Point};
use crate::grid::{Cell, GridDims, GridMap};
use crate::metrics::{mse, nlpd};
use crate::roi::{roi_path_agnostic, RoiGaussian};
use crate::sensor::perceive;
use crate::sgpr::{sgpr_predict, sgpr_variational, InducingSet};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub betas: Vec<f64>,
    pub budgets: Vec<usize>,
    /// RoI center; `None` picks `(3W/4, H/4)`.
    pub goal: Option<Cell>,
    /// RoI spread; `None` uses `W/8`, at least one cell.
    pub sigma_tilde: Option<f64>,
    pub noise_std: f64,
    pub prior_mean: f64,
    pub initial_params: KernelParams,
    pub fit_epochs: usize,
    pub fit_lr: f64,
    /// Cap on the readings used for fitting and inside the bound.
    pub max_fit_points: usize,
    pub mc_samples: usize,
    pub selection: SelectionOptions,
    pub seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            betas: vec![1.0, 10.0, 50.0, 100.0],
            budgets: vec![30, 60, 300, 600],
            goal: None,
            sigma_tilde: None,
            noise_std: 0.05,
            prior_mean: 0.5,
            initial_params: KernelParams::isotropic(0.05, 4.0, 1e-3),
            fit_epochs: 200,
            fit_lr: 0.02,
            max_fit_points: 256,
            mc_samples: 16,
            selection: SelectionOptions { epochs: 300, ..SelectionOptions::default() },
            seed: 0,
        }
    }
}

impl AblationConfig {
    pub fn resolved_goal(&self, dims: GridDims) -> Cell {
        self.goal.unwrap_or(Cell::new(3 * dims.width / 4, dims.height / 4))
    }

    pub fn resolved_sigma_tilde(&self, dims: GridDims) -> f64 {
        self.sigma_tilde.unwrap_or((dims.width as f64 / 8.0).max(1.0))
    }
}

/// Result for one `(β, m*)` pair.
#[derive(Debug, Clone)]
pub struct AblationCell {
    pub beta: f64,
    /// Requested budget.
    pub budget: usize,
    /// Budget actually used after clamping to the map size.
    pub used_budget: usize,
    pub transmitted: Vec<Cell>,
    pub nlpd: f64,
    pub mse: f64,
    /// Mean Mahalanobis distance of the transmitted cells to the RoI mean.
    pub mean_mahalanobis: f64,
    pub prediction: GaussianPrediction,
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub params: KernelParams,
    pub roi: RoiGaussian,
    pub cells: Vec<AblationCell>,
    pub warnings: Vec<String>,
}

impl AblationResult {
    pub fn cell(&self, beta: f64, budget: usize) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.beta == beta && c.budget == budget)
    }
}

/// Row-major lattice subset with at most `max` cells, evenly spread.
pub fn lattice_subset(dims: GridDims, max: usize) -> Vec<Cell> {
    if max == 0 {
        return Vec::new();
    }
    let mut step = 1;
    while dims.width.div_ceil(step) * dims.height.div_ceil(step) > max {
        step += 1;
    }
    dims.cells().filter(|c| c.x % step == 0 && c.y % step == 0).collect()
}

/// Receiver-side reconstruction from the relayed readings only.
pub fn reconstruct(
    params: &KernelParams,
    relayed: &[(Cell, f64)],
    noise_std: f64,
    dims: GridDims,
    prior_mean: f64,
) -> Result<GaussianPrediction> {
    let queries = dims.points();
    if relayed.is_empty() {
        return Ok(GaussianPrediction::prior(prior_mean, params.signal_variance(), queries.len()));
    }
    let mut train = Dataset::new();
    for &(c, v) in relayed {
        train.push(c.point(), v, noise_std);
    }
    let z = InducingSet::new(train.inputs().to_vec())?;
    let q = sgpr_variational(params, &train, &z, prior_mean)?;
    sgpr_predict(params, &z, &q, &queries, prior_mean)
}

/// Runs one selection per β over all cells and evaluates every budget
/// against the same selection.
pub fn run_ablation(map: &GridMap, cfg: &AblationConfig) -> Result<AblationResult> {
    if cfg.betas.is_empty() || cfg.budgets.is_empty() {
        return Err(Error::InvalidConfig("ablation needs at least one beta and one budget".into()));
    }
    let dims = map.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let center = Cell::new(dims.width / 2, dims.height / 2);
    let readings = perceive(map, center, 2 * dims.width.max(dims.height) + 1, cfg.noise_std, &mut rng);
    let mut all = Dataset::new();
    for &(c, v) in &readings {
        all.push(c.point(), v, cfg.noise_std);
    }
    let mut train = Dataset::new();
    for c in lattice_subset(dims, cfg.max_fit_points) {
        train.push(c.point(), readings[dims.index(c)].1, cfg.noise_std);
    }
    let params = fit_hyperparams(
        &cfg.initial_params,
        &train,
        cfg.prior_mean,
        &FitOptions::new(cfg.fit_epochs, cfg.fit_lr),
    )?
    .params;
    let goal = cfg.resolved_goal(dims);
    let roi = roi_path_agnostic(goal.point(), cfg.resolved_sigma_tilde(dims))?;
    let candidates: Vec<Point> = dims.points();

    let mut warnings = Vec::new();
    let mut cells = Vec::new();
    for (bi, &beta) in cfg.betas.iter().enumerate() {
        let max_budget = cfg.budgets.iter().copied().max().unwrap_or(0).min(candidates.len());
        let seed = sub_seed(cfg.seed, bi as u64, 1);
        let mut sel = VariationalSelection::new(candidates.clone(), beta, max_budget, cfg.mc_samples, seed)?;
        optimize_selection(&mut sel, &params, &train, &roi, cfg.prior_mean, &cfg.selection)?;
        for &budget in &cfg.budgets {
            let used = budget.min(candidates.len());
            if used < budget && bi == 0 {
                warnings.push(format!("budget {budget} exceeds the {} map cells; using {used}", candidates.len()));
            }
            sel.budget = used;
            let idx = extract_transmitted(&sel, &roi)?;
            let transmitted: Vec<Cell> = idx.iter().map(|&i| dims.cell(i)).collect();
            let relayed: Vec<(Cell, f64)> = transmitted.iter().map(|&c| (c, readings[dims.index(c)].1)).collect();
            let prediction = reconstruct(&params, &relayed, cfg.noise_std, dims, cfg.prior_mean)?;
            let mean_mahalanobis = if transmitted.is_empty() {
                0.0
            } else {
                transmitted.iter().map(|c| roi.mahalanobis2(c.point()).sqrt()).sum::<f64>() / transmitted.len() as f64
            };
            cells.push(AblationCell {
                beta,
                budget,
                used_budget: used,
                nlpd: nlpd(map.values(), &prediction),
                mse: mse(map.values(), &prediction.mean),
                transmitted,
                mean_mahalanobis,
                prediction,
            });
        }
    }
    Ok(AblationResult { params, roi, cells, warnings })
}
