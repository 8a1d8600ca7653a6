//! The Sensor: frontier exploration steered by the RoI and its own
//! uncertainty, and selective relay of observations to the Actor.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::beta_sgp::{extract_transmitted, optimize_selection, sub_seed, SelectionOptions, VariationalSelection};
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparams, Dataset, FitOptions, KernelParams, Point};
use crate::grid::{Action, Cell, GridDims, GridMap};
use crate::roi::{representative_waypoints, roi_path_agnostic, roi_path_dependent, RoiGaussian};
use crate::sgpr::{sgpr_predict, sgpr_variational, InducingSet, VariationalGaussian};

/// Noisy readings of every in-bounds cell of the `window`x`window` patch
/// around `position`, row-major.
pub fn perceive<R: Rng>(map: &GridMap, position: Cell, window: usize, noise_std: f64, rng: &mut R) -> Vec<(Cell, f64)> {
    let cells = map.dims().window(position, window);
    if noise_std == 0.0 {
        return cells.into_iter().map(|c| (c, map.get(c))).collect();
    }
    let noise = Normal::new(0.0, noise_std).expect("noise std must be finite and non-negative");
    cells.into_iter().map(|c| (c, map.get(c) + noise.sample(rng))).collect()
}

/// Incremental frontier maintenance after `newly` explored cells were added
/// to `explored`.
pub fn update_frontiers(frontier: &mut BTreeSet<Cell>, explored: &[bool], dims: GridDims, newly: &[Cell]) {
    for &c in newly {
        frontier.remove(&c);
    }
    for &c in newly {
        for n in dims.neighbors4(c) {
            if !explored[dims.index(n)] {
                frontier.insert(n);
            }
        }
    }
}

/// Frontier cell maximizing `(p(x) + γ σ(x)) / ‖x - position‖` with
/// `γ = gamma_coeff · max p / max σ` over the frontier. `sigma[i]` belongs to
/// `frontier[i]`. Ties go to the earlier cell.
pub fn select_target(
    frontier: &[Cell],
    sigma: &[f64],
    position: Cell,
    roi: &RoiGaussian,
    gamma_coeff: f64,
) -> Result<Cell> {
    if frontier.is_empty() {
        return Err(Error::EmptyFrontier);
    }
    assert_eq!(frontier.len(), sigma.len(), "one standard deviation per frontier cell");
    let p: Vec<f64> = frontier.iter().map(|c| roi.density(c.point())).collect();
    let max_p = p.iter().copied().fold(0.0, f64::max);
    let max_s = sigma.iter().copied().fold(0.0, f64::max);
    let gamma = if max_s > 0.0 { gamma_coeff * max_p / max_s } else { 0.0 };
    let mut best = (f64::NEG_INFINITY, frontier[0]);
    for ((&c, &pc), &sc) in frontier.iter().zip(&p).zip(sigma) {
        let score = (pc + gamma * sc) / c.euclidean(position);
        if score > best.0 {
            best = (score, c);
        }
    }
    Ok(best.1)
}

/// Projects the direction to `target` onto the four moves; the axis with
/// the larger offset wins and ties go to the horizontal axis.
pub fn step_toward(position: Cell, target: Cell) -> Action {
    let dx = target.x as i64 - position.x as i64;
    let dy = target.y as i64 - position.y as i64;
    if dx.abs() >= dy.abs() {
        if dx > 0 {
            Action::Right
        } else {
            Action::Left
        }
    } else if dy > 0 {
        Action::Up
    } else {
        Action::Down
    }
}

/// `𝒜 ∪= previously transmitted ∪ Actor's current window`.
pub fn update_overlap(
    overlap: &mut [bool],
    dims: GridDims,
    last_transmitted: &[Cell],
    actor_position: Cell,
    actor_window: usize,
) {
    for &c in last_transmitted {
        overlap[dims.index(c)] = true;
    }
    for c in dims.window(actor_position, actor_window) {
        overlap[dims.index(c)] = true;
    }
}

/// What the Sensor relays each tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relay {
    /// Every newly observed cell.
    Full,
    /// The β-SGP selection under the per-tick budget.
    Selective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    pub window: usize,
    pub noise_std: f64,
    pub gamma_coeff: f64,
    pub sigma_tilde: f64,
    pub max_waypoints: usize,
    pub actor_window: usize,
    pub prior_mean: f64,
    pub relay: Relay,
    pub beta: f64,
    pub mc_samples: usize,
    pub selection: SelectionOptions,
    pub initial_params: KernelParams,
    pub fit_epochs_initial: usize,
    pub fit_epochs_warm: usize,
    pub fit_lr: f64,
    /// Cap on the points used for hyperparameter fits and for the bound
    /// inside the selection.
    pub max_fit_points: usize,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            window: 7,
            noise_std: 0.05,
            gamma_coeff: 0.05,
            sigma_tilde: 10.0,
            max_waypoints: 16,
            actor_window: 5,
            prior_mean: 0.5,
            relay: Relay::Selective,
            beta: 10.0,
            mc_samples: 16,
            selection: SelectionOptions::default(),
            initial_params: KernelParams::isotropic(0.05, 4.0, 1e-3),
            fit_epochs_initial: 200,
            fit_epochs_warm: 50,
            fit_lr: 0.02,
            max_fit_points: 128,
        }
    }
}

#[derive(Debug, Clone)]
struct Predictor {
    params: KernelParams,
    z: InducingSet,
    q: VariationalGaussian,
}

/// One tick's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorStep {
    pub position: Cell,
    pub target: Option<Cell>,
    pub transmitted: Vec<(Cell, f64)>,
    /// Candidates available to the selection this tick.
    pub candidates: usize,
}

#[derive(Debug, Clone)]
pub struct SensorState {
    cfg: SensorConfig,
    dims: GridDims,
    goal: Cell,
    position: Cell,
    observations: Dataset,
    explored: Vec<bool>,
    frontier: BTreeSet<Cell>,
    overlap: Vec<bool>,
    transmitted: Vec<bool>,
    last_transmitted: Vec<Cell>,
    unsent: Vec<Cell>,
    roi: RoiGaussian,
    params: KernelParams,
    fitted: bool,
    predictor: Option<Predictor>,
    rng: ChaCha8Rng,
    seed: u64,
    ticks: u64,
    script: Option<VecDeque<Cell>>,
}

impl SensorState {
    /// Places the Sensor at `start` and takes its first reading there.
    pub fn new(cfg: SensorConfig, map: &GridMap, start: Cell, goal: Cell, seed: u64) -> Result<Self> {
        let dims = map.dims();
        if !dims.contains(start) || !dims.contains(goal) {
            return Err(Error::InvalidConfig(format!("sensor start {start} or goal {goal} outside the map")));
        }
        let roi = roi_path_agnostic(goal.point(), cfg.sigma_tilde)?;
        let mut s = Self {
            params: cfg.initial_params,
            cfg,
            dims,
            goal,
            position: start,
            observations: Dataset::new(),
            explored: vec![false; dims.len()],
            frontier: BTreeSet::new(),
            overlap: vec![false; dims.len()],
            transmitted: vec![false; dims.len()],
            last_transmitted: Vec::new(),
            unsent: Vec::new(),
            roi,
            fitted: false,
            predictor: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            ticks: 0,
            script: None,
        };
        s.observe(map);
        Ok(s)
    }

    pub fn position(&self) -> Cell {
        self.position
    }

    /// Replaces target selection by a fixed sequence of positions, one per
    /// tick; the Sensor holds still once it runs out.
    pub fn pin_path(&mut self, positions: &[Cell]) {
        self.script = Some(positions.iter().copied().collect());
    }

    pub fn observations(&self) -> &Dataset {
        &self.observations
    }

    pub fn is_explored(&self, c: Cell) -> bool {
        self.explored[self.dims.index(c)]
    }

    pub fn frontier(&self) -> &BTreeSet<Cell> {
        &self.frontier
    }

    pub fn overlap(&self) -> &[bool] {
        &self.overlap
    }

    pub fn transmitted_mask(&self) -> &[bool] {
        &self.transmitted
    }

    pub fn roi(&self) -> &RoiGaussian {
        &self.roi
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    fn observe(&mut self, map: &GridMap) {
        let reading = perceive(map, self.position, self.cfg.window, self.cfg.noise_std, &mut self.rng);
        let mut newly = Vec::new();
        for (c, v) in reading {
            self.observations.push(c.point(), v, self.cfg.noise_std);
            let i = self.dims.index(c);
            if !self.explored[i] {
                self.explored[i] = true;
                newly.push(c);
            }
        }
        update_frontiers(&mut self.frontier, &self.explored, self.dims, &newly);
        self.unsent.extend(newly);
    }

    fn value(&self, c: Cell) -> f64 {
        let i = self.observations.position(c.point()).expect("transmitted cells are observed");
        self.observations.target(i)
    }

    /// Predictive standard deviation at `cells` from the last predictor, or
    /// the prior when there is none.
    pub fn posterior_std(&self, cells: &[Cell]) -> Result<Vec<f64>> {
        match &self.predictor {
            None => Ok(vec![self.params.signal_variance().sqrt(); cells.len()]),
            Some(p) => {
                let pts: Vec<Point> = cells.iter().map(|c| c.point()).collect();
                Ok(sgpr_predict(&p.params, &p.z, &p.q, &pts, self.cfg.prior_mean)?.std())
            }
        }
    }

    fn fit(&mut self) -> Result<()> {
        let epochs = if self.fitted { self.cfg.fit_epochs_warm } else { self.cfg.fit_epochs_initial };
        let train = self.observations.thinned(self.cfg.max_fit_points);
        let opts = FitOptions::new(epochs, self.cfg.fit_lr);
        self.params = fit_hyperparams(&self.params, &train, self.cfg.prior_mean, &opts)?.params;
        self.fitted = true;
        Ok(())
    }

    /// One step of the Sensor loop: move toward the best frontier cell,
    /// observe, refresh the RoI from the Actor's path and the overlap set,
    /// relay up to `budget` points and update the sparse predictor.
    pub fn tick(&mut self, map: &GridMap, actor_path: &[Cell], actor_position: Cell, budget: usize) -> Result<SensorStep> {
        let selective = self.cfg.relay == Relay::Selective;
        if let Some(script) = &mut self.script {
            let target = script.pop_front();
            if let Some(t) = target {
                if !self.dims.contains(t) {
                    return Err(Error::InvalidConfig(format!("pinned sensor position {t} outside the map")));
                }
                self.position = t;
            }
            return self.after_move(map, actor_path, actor_position, budget, target);
        }
        let frontier: Vec<Cell> = self.frontier.iter().copied().collect();
        let sigma = if selective {
            self.posterior_std(&frontier)?
        } else {
            vec![self.params.signal_variance().sqrt(); frontier.len()]
        };
        let target = match select_target(&frontier, &sigma, self.position, &self.roi, self.cfg.gamma_coeff) {
            Ok(t) => Some(t),
            Err(Error::EmptyFrontier) => None,
            Err(e) => return Err(e),
        };
        if let Some(t) = target {
            self.position = step_toward(self.position, t).apply(self.position, self.dims);
        }
        self.after_move(map, actor_path, actor_position, budget, target)
    }

    fn after_move(
        &mut self,
        map: &GridMap,
        actor_path: &[Cell],
        actor_position: Cell,
        budget: usize,
        target: Option<Cell>,
    ) -> Result<SensorStep> {
        let selective = self.cfg.relay == Relay::Selective;
        self.observe(map);

        if selective && !actor_path.is_empty() {
            let pts: Vec<Point> =
                representative_waypoints(actor_path, self.cfg.max_waypoints).iter().map(|c| c.point()).collect();
            self.roi = roi_path_dependent(&pts, self.cfg.sigma_tilde)?;
        }
        let last = std::mem::take(&mut self.last_transmitted);
        update_overlap(&mut self.overlap, self.dims, &last, actor_position, self.cfg.actor_window);

        let (sent, candidates) = if selective {
            self.unsent.clear();
            self.fit()?;
            self.select(budget)?
        } else {
            let sent: Vec<Cell> = std::mem::take(&mut self.unsent);
            let n = sent.len();
            (sent, n)
        };
        for &c in &sent {
            let i = self.dims.index(c);
            debug_assert!(!self.transmitted[i], "cell {c} transmitted twice");
            self.transmitted[i] = true;
        }
        let transmitted: Vec<(Cell, f64)> = sent.iter().map(|&c| (c, self.value(c))).collect();
        self.last_transmitted = sent;
        if selective {
            self.update_predictor()?;
        }
        self.ticks += 1;
        Ok(SensorStep { position: self.position, target, transmitted, candidates })
    }

    fn select(&mut self, budget: usize) -> Result<(Vec<Cell>, usize)> {
        let cands: Vec<Cell> = self
            .dims
            .cells()
            .filter(|&c| {
                let i = self.dims.index(c);
                self.explored[i] && !self.overlap[i] && !self.transmitted[i]
            })
            .collect();
        let n = cands.len();
        if budget == 0 || n == 0 {
            return Ok((Vec::new(), n));
        }
        if n <= budget {
            return Ok((cands, n));
        }
        let pts: Vec<Point> = cands.iter().map(|c| c.point()).collect();
        let seed = sub_seed(self.seed, self.ticks, u64::MAX);
        let mut sel = VariationalSelection::new(pts, self.cfg.beta, budget, self.cfg.mc_samples, seed)?;
        let train = self.observations.thinned(self.cfg.max_fit_points);
        optimize_selection(&mut sel, &self.params, &train, &self.roi, self.cfg.prior_mean, &self.cfg.selection)?;
        let idx = extract_transmitted(&sel, &self.roi)?;
        Ok((idx.into_iter().map(|i| cands[i]).collect(), n))
    }

    /// Sparse predictor trained on the Sensor's readings at every
    /// transmitted or overlap cell it has observed, with those cells as the
    /// inducing set.
    fn update_predictor(&mut self) -> Result<()> {
        let mut train = Dataset::new();
        for c in self.dims.cells() {
            let i = self.dims.index(c);
            if self.explored[i] && (self.transmitted[i] || self.overlap[i]) {
                train.push(c.point(), self.value(c), self.cfg.noise_std);
            }
        }
        if train.is_empty() {
            self.predictor = None;
            return Ok(());
        }
        let z = InducingSet::new(train.inputs().to_vec())?;
        let q = sgpr_variational(&self.params, &train, &z, self.cfg.prior_mean)?;
        self.predictor = Some(Predictor { params: self.params, z, q });
        Ok(())
    }

    /// Cells observed since the last relay and not yet sent.
    pub fn unsent(&self) -> &[Cell] {
        &self.unsent
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }
}
