//! The Actor: map prediction from its own and received readings, truncation,
//! cost-field planning and path execution with deadlock handling.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gp::{fit_hyperparams, Dataset, ExactGp, FitOptions, GaussianPrediction, KernelParams, Point};
use crate::grid::{Action, Cell, GridDims, GridMap};
use crate::planner::{build_cost_field, shortest_path, truncate};
use crate::sensor::perceive;

/// Predictive variance reported for cells the raw-map Actor never observed:
/// that of a uniform value on `[0, 1]`.
pub const UNKNOWN_CELL_VARIANCE: f64 = 1.0 / 12.0;

/// How the Actor turns readings into a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapModel {
    /// Exact GP over all readings.
    Gp,
    /// Raw readings written straight into the belief map, latest wins.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorConfig {
    pub window: usize,
    pub noise_std: f64,
    /// Noise attached to readings received from the Sensor.
    pub received_noise_std: f64,
    pub sigma_th: f64,
    pub y0: f64,
    pub epsilon: f64,
    pub a: f64,
    pub model: MapModel,
    pub initial_params: KernelParams,
    pub fit_epochs_initial: usize,
    pub fit_epochs_warm: usize,
    pub fit_lr: f64,
    pub max_fit_points: usize,
    /// Entering a cell visited this many times counts as a deadlock.
    pub deadlock_visits: u32,
    /// Number of moves executed from a frozen plan.
    pub freeze_len: usize,
}

impl Default for ActorConfig {
    fn default() -> Self {
        Self {
            window: 5,
            noise_std: 0.01,
            received_noise_std: 0.05,
            sigma_th: 0.14,
            y0: 0.5,
            epsilon: 0.501,
            a: 0.1,
            model: MapModel::Gp,
            initial_params: KernelParams::isotropic(0.05, 4.0, 1e-3),
            fit_epochs_initial: 200,
            fit_epochs_warm: 50,
            fit_lr: 0.05,
            max_fit_points: 128,
            deadlock_visits: 3,
            freeze_len: 8,
        }
    }
}

/// One tick's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorStep {
    pub action: Action,
    pub position: Cell,
    /// Whether the move came from a frozen plan.
    pub frozen: bool,
}

#[derive(Debug, Clone)]
pub struct ActorState {
    cfg: ActorConfig,
    dims: GridDims,
    position: Cell,
    goal: Cell,
    observations: Dataset,
    raw: Vec<Option<(f64, f64)>>,
    truncated: Vec<f64>,
    prediction: GaussianPrediction,
    frozen: VecDeque<Cell>,
    plan: Vec<Cell>,
    visits: Vec<u32>,
    params: KernelParams,
    fitted: bool,
    rng: ChaCha8Rng,
}

impl ActorState {
    pub fn new(cfg: ActorConfig, dims: GridDims, start: Cell, goal: Cell, seed: u64) -> Result<Self> {
        if !dims.contains(start) || !dims.contains(goal) {
            return Err(Error::InvalidConfig(format!("actor start {start} or goal {goal} outside the map")));
        }
        let mut visits = vec![0; dims.len()];
        visits[dims.index(start)] = 1;
        let prediction = match cfg.model {
            MapModel::Gp => GaussianPrediction::prior(cfg.y0, cfg.initial_params.signal_variance(), dims.len()),
            MapModel::Raw => GaussianPrediction::prior(cfg.y0, UNKNOWN_CELL_VARIANCE, dims.len()),
        };
        Ok(Self {
            truncated: vec![cfg.y0; dims.len()],
            params: cfg.initial_params,
            cfg,
            dims,
            position: start,
            goal,
            observations: Dataset::new(),
            raw: vec![None; dims.len()],
            prediction,
            frozen: VecDeque::new(),
            plan: Vec::new(),
            visits,
            fitted: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn position(&self) -> Cell {
        self.position
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn at_goal(&self) -> bool {
        self.position == self.goal
    }

    pub fn observations(&self) -> &Dataset {
        &self.observations
    }

    pub fn truncated_map(&self) -> &[f64] {
        &self.truncated
    }

    /// Latest full-grid prediction (mean and variance per cell).
    pub fn prediction(&self) -> &GaussianPrediction {
        &self.prediction
    }

    /// Remaining planned cells, shared with the Sensor.
    pub fn plan(&self) -> &[Cell] {
        &self.plan
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn visits(&self, c: Cell) -> u32 {
        self.visits[self.dims.index(c)]
    }

    pub fn is_frozen(&self) -> bool {
        !self.frozen.is_empty()
    }

    fn record(&mut self, c: Cell, v: f64, noise_std: f64) {
        self.observations.push(c.point(), v, noise_std);
        self.raw[self.dims.index(c)] = Some((v, noise_std * noise_std));
    }

    /// Adds received readings without moving. Existing readings are kept.
    pub fn receive(&mut self, received: &[(Cell, f64)]) {
        let s = self.cfg.received_noise_std;
        for &(c, v) in received {
            self.record(c, v, s);
        }
    }

    /// Reads the Actor's own window.
    pub fn sense(&mut self, map: &GridMap) {
        let reading = perceive(map, self.position, self.cfg.window, self.cfg.noise_std, &mut self.rng);
        let s = self.cfg.noise_std;
        for (c, v) in reading {
            self.record(c, v, s);
        }
    }

    /// Rebuilds the belief map from the current readings.
    pub fn update_map(&mut self) -> Result<()> {
        match self.cfg.model {
            MapModel::Raw => {
                let (mean, variance) = self
                    .raw
                    .iter()
                    .map(|r| r.unwrap_or((self.cfg.y0, UNKNOWN_CELL_VARIANCE)))
                    .unzip();
                self.prediction = GaussianPrediction { mean, variance };
                self.truncated = self.prediction.mean.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            }
            MapModel::Gp => {
                let epochs = if self.fitted { self.cfg.fit_epochs_warm } else { self.cfg.fit_epochs_initial };
                let train = self.observations.thinned(self.cfg.max_fit_points);
                let opts = FitOptions::cosine(epochs, self.cfg.fit_lr);
                self.params = fit_hyperparams(&self.params, &train, self.cfg.y0, &opts)?.params;
                self.fitted = true;
                let gp = ExactGp::fit(&self.params, &self.observations, self.cfg.y0)?;
                let queries: Vec<Point> = self.dims.points();
                self.prediction = gp.predict(&queries);
                self.truncated = truncate(&self.prediction, self.cfg.sigma_th, self.cfg.y0);
            }
        }
        Ok(())
    }

    /// Minimum-cost path from the current position on the current belief.
    pub fn replan(&mut self) -> Result<Vec<Cell>> {
        let costs = build_cost_field(self.dims, &self.truncated, self.cfg.epsilon, self.cfg.a, self.cfg.y0)?;
        Ok(shortest_path(&costs, self.position, self.goal))
    }

    /// Senses, merges `received`, and moves one cell. While a frozen plan is
    /// pending the map is not refit and no replanning happens.
    pub fn tick(&mut self, map: &GridMap, received: &[(Cell, f64)]) -> Result<ActorStep> {
        if self.at_goal() {
            return Err(Error::InvalidConfig("actor is already at its goal".into()));
        }
        self.sense(map);
        self.receive(received);
        let frozen = !self.frozen.is_empty();
        let next = if let Some(next) = self.frozen.pop_front() {
            self.plan = self.frozen.iter().copied().collect();
            next
        } else {
            self.update_map()?;
            let path = self.replan()?;
            let first = path[0];
            if self.visits(first) >= self.cfg.deadlock_visits {
                let take = self.cfg.freeze_len.min(path.len());
                self.frozen = path[1..take].iter().copied().collect();
            }
            self.plan = path[1..].to_vec();
            first
        };
        let action = Action::between(self.position, next).expect("planned cells are adjacent");
        self.position = next;
        self.visits[self.dims.index(next)] += 1;
        Ok(ActorStep { action, position: next, frozen })
    }

    /// Forces a frozen plan; used to script deadlock scenarios.
    pub fn freeze(&mut self, cells: &[Cell]) {
        self.frozen = cells.iter().copied().collect();
    }
}
