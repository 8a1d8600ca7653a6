//! Episode orchestration for the communication frameworks and batched runs
//! over random Sensor starts.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::actor::{ActorConfig, ActorState, MapModel};
use crate::beta_sgp::sub_seed;
use crate::error::{Error, Result};
use crate::gp::GaussianPrediction;
use crate::grid::{Cell, GridMap};
use crate::metrics::{accumulated_cost, mse, nlpd, summarize, EpisodeMetrics, FrameworkSummary};
use crate::roi::default_sigma_tilde;
use crate::sensor::{Relay, SensorConfig, SensorState};

/// Who transmits what to the Actor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Framework {
    /// No communication.
    U,
    /// Every Sensor reading, written raw into the Actor's map.
    Fi,
    /// Every Sensor reading, fed into the Actor's GP.
    FiGp,
    /// β-SGP selection under the budget schedule.
    BetaSgp { beta: f64 },
}

impl Framework {
    pub fn uses_sensor(&self) -> bool {
        !matches!(self, Framework::U)
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Framework::U => f.write_str("U"),
            Framework::Fi => f.write_str("FI"),
            Framework::FiGp => f.write_str("FI-GP"),
            Framework::BetaSgp { beta } => write!(f, "BETA_SGP_{beta}"),
        }
    }
}

impl FromStr for Framework {
    type Err = Error;

    /// Accepts `u`, `fi`, `fi-gp` and `beta-sgp` (β defaults to 10), case
    /// and separator insensitive, plus labels such as `BETA_SGP_1`.
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.trim().to_ascii_lowercase().replace('_', "-");
        match norm.as_str() {
            "u" => return Ok(Framework::U),
            "fi" => return Ok(Framework::Fi),
            "fi-gp" | "figp" => return Ok(Framework::FiGp),
            "beta-sgp" | "betasgp" => return Ok(Framework::BetaSgp { beta: 10.0 }),
            _ => {}
        }
        if let Some(b) = norm.strip_prefix("beta-sgp-") {
            if let Ok(beta) = b.parse::<f64>() {
                return Ok(Framework::BetaSgp { beta });
            }
        }
        Err(Error::InvalidConfig(format!("unknown framework {s:?} (expected u, fi, fi-gp or beta-sgp)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub framework: Framework,
    /// Per-tick point budget, repeated periodically.
    pub budget: Vec<usize>,
    pub actor_start: Cell,
    pub goal: Cell,
    pub sensor_start: Cell,
    /// Last tick on which the Sensor acts.
    pub sensor_horizon: usize,
    /// Tick limit; `None` means four times the number of cells.
    pub max_steps: Option<usize>,
    /// RoI spread; `None` uses a third of the Sensor-start-to-goal distance.
    pub sigma_tilde: Option<f64>,
    pub actor: ActorConfig,
    pub sensor: SensorConfig,
    /// Sensor positions to follow instead of its own target selection.
    pub sensor_path: Option<Vec<Cell>>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            framework: Framework::BetaSgp { beta: 10.0 },
            budget: vec![2, 1],
            actor_start: Cell::new(12, 33),
            goal: Cell::new(43, 25),
            sensor_start: Cell::new(32, 32),
            sensor_horizon: 70,
            max_steps: None,
            sigma_tilde: None,
            actor: ActorConfig::default(),
            sensor: SensorConfig::default(),
            sensor_path: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn budget_at(&self, t: usize) -> usize {
        if self.budget.is_empty() {
            0
        } else {
            self.budget[t % self.budget.len()]
        }
    }

    pub fn resolved_sigma_tilde(&self) -> f64 {
        self.sigma_tilde.unwrap_or_else(|| default_sigma_tilde(self.sensor_start.point(), self.goal.point()))
    }

    /// Agent configurations with the framework and shared settings applied.
    pub fn agent_configs(&self) -> (ActorConfig, SensorConfig) {
        let mut actor = self.actor.clone();
        let mut sensor = self.sensor.clone();
        actor.received_noise_std = sensor.noise_std;
        actor.model = if self.framework == Framework::Fi { MapModel::Raw } else { MapModel::Gp };
        sensor.actor_window = actor.window;
        sensor.prior_mean = actor.y0;
        sensor.sigma_tilde = self.resolved_sigma_tilde();
        match self.framework {
            Framework::BetaSgp { beta } => {
                sensor.relay = Relay::Selective;
                sensor.beta = beta;
            }
            _ => sensor.relay = Relay::Full,
        }
        (actor, sensor)
    }

    fn validate(&self, map: &GridMap) -> Result<()> {
        let dims = map.dims();
        for (name, c) in [("actor start", self.actor_start), ("goal", self.goal), ("sensor start", self.sensor_start)] {
            if !dims.contains(c) {
                return Err(Error::InvalidConfig(format!(
                    "{name} {c} outside the {}x{} map",
                    dims.width, dims.height
                )));
            }
        }
        if let Framework::BetaSgp { beta } = self.framework {
            if beta.is_nan() || beta < 1.0 {
                return Err(Error::InvalidConfig(format!("beta must be >= 1, got {beta}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub framework: String,
    pub sensor_start: Cell,
    /// Actor positions, starting with its start cell.
    pub actor_trace: Vec<Cell>,
    /// Sensor positions, starting with its start cell; empty without a Sensor.
    pub sensor_trace: Vec<Cell>,
    /// Points relayed on each tick.
    pub transmissions: Vec<Vec<(Cell, f64)>>,
    /// Ticks until the Actor stopped.
    pub t_final: usize,
    pub reached_goal: bool,
    /// `𝒞`: true cost of the entered cells.
    pub path_cost: f64,
    /// `ℬ`: total points relayed.
    pub comm_cost: usize,
    pub nlpd: f64,
    pub mse: f64,
    pub final_prediction: GaussianPrediction,
    pub final_truncated: Vec<f64>,
}

impl EpisodeRecord {
    pub fn metrics(&self, sim_id: usize) -> EpisodeMetrics {
        EpisodeMetrics {
            sim_id,
            framework: self.framework.clone(),
            t_final: self.t_final,
            path_cost: self.path_cost,
            comm_cost: self.comm_cost,
            nlpd: self.nlpd,
            mse: self.mse,
        }
    }

    /// Every relayed cell, in order.
    pub fn transmitted_cells(&self) -> Vec<Cell> {
        self.transmissions.iter().flatten().map(|&(c, _)| c).collect()
    }
}

/// Runs one episode: each tick the Sensor acts first (while within its
/// horizon), then the Actor senses, merges what was relayed and moves.
pub fn run_episode(map: &GridMap, cfg: &SimConfig) -> Result<EpisodeRecord> {
    cfg.validate(map)?;
    let (actor_cfg, sensor_cfg) = cfg.agent_configs();
    let a = actor_cfg.a;
    let mut actor = ActorState::new(actor_cfg, map.dims(), cfg.actor_start, cfg.goal, sub_seed(cfg.seed, 0, 1))?;
    let mut sensor = if cfg.framework.uses_sensor() {
        let mut s = SensorState::new(sensor_cfg, map, cfg.sensor_start, cfg.goal, sub_seed(cfg.seed, 0, 2))?;
        if let Some(path) = &cfg.sensor_path {
            s.pin_path(path);
        }
        Some(s)
    } else {
        None
    };
    let max_steps = cfg.max_steps.unwrap_or(4 * map.len());
    let mut actor_trace = vec![cfg.actor_start];
    let mut sensor_trace = sensor.as_ref().map_or_else(Vec::new, |s| vec![s.position()]);
    let mut transmissions = Vec::new();
    let mut t = 0;
    while !actor.at_goal() && t < max_steps {
        let received = match &mut sensor {
            Some(s) if t <= cfg.sensor_horizon => {
                let step = s.tick(map, actor.plan(), actor.position(), cfg.budget_at(t))?;
                sensor_trace.push(step.position);
                step.transmitted
            }
            _ => Vec::new(),
        };
        let step = actor.tick(map, &received)?;
        actor_trace.push(step.position);
        transmissions.push(received);
        t += 1;
    }
    actor.update_map()?;
    let prediction = actor.prediction().clone();
    let comm_cost = transmissions.iter().map(Vec::len).sum();
    Ok(EpisodeRecord {
        framework: cfg.framework.to_string(),
        sensor_start: cfg.sensor_start,
        path_cost: accumulated_cost(&actor_trace[1..], map, a),
        reached_goal: actor.at_goal(),
        actor_trace,
        sensor_trace,
        transmissions,
        t_final: t,
        comm_cost,
        nlpd: nlpd(map.values(), &prediction),
        mse: mse(map.values(), &prediction.mean),
        final_prediction: prediction,
        final_truncated: actor.truncated_map().to_vec(),
    })
}

/// One simulation index of a batch.
#[derive(Debug)]
pub struct BatchEpisode {
    pub sim_id: usize,
    pub framework: Framework,
    pub sensor_start: Cell,
    pub result: Result<EpisodeRecord>,
}

#[derive(Debug)]
pub struct BatchResult {
    pub episodes: Vec<BatchEpisode>,
}

impl BatchResult {
    /// Metrics rows of the successful episodes, ordered by simulation then
    /// framework.
    pub fn metrics(&self) -> Vec<EpisodeMetrics> {
        self.episodes
            .iter()
            .filter_map(|e| e.result.as_ref().ok().map(|r| r.metrics(e.sim_id)))
            .collect()
    }

    pub fn summary(&self) -> Vec<FrameworkSummary> {
        summarize(&self.metrics())
    }

    pub fn failures(&self) -> impl Iterator<Item = &BatchEpisode> {
        self.episodes.iter().filter(|e| e.result.is_err())
    }
}

/// Sensor starts drawn uniformly over the map from `seed`.
pub fn sensor_starts(map: &GridMap, n_sim: usize, seed: u64) -> Vec<Cell> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = map.dims();
    (0..n_sim).map(|_| dims.cell(rng.random_range(0..dims.len()))).collect()
}

/// Runs every framework on `n_sim` random Sensor starts. All frameworks of a
/// simulation share its start and its random streams. Failed episodes are
/// kept in the result and left out of the metrics.
pub fn run_batch(
    map: &GridMap,
    base: &SimConfig,
    frameworks: &[Framework],
    n_sim: usize,
    seed: u64,
) -> Result<BatchResult> {
    if n_sim == 0 {
        return Err(Error::InvalidConfig("n_sim must be at least 1".into()));
    }
    if frameworks.is_empty() {
        return Err(Error::InvalidConfig("no frameworks to run".into()));
    }
    let starts = sensor_starts(map, n_sim, seed);
    let jobs: Vec<(usize, Framework)> =
        (0..n_sim).flat_map(|i| frameworks.iter().map(move |&f| (i, f))).collect();
    let episodes = jobs
        .into_par_iter()
        .map(|(sim_id, framework)| {
            let cfg = SimConfig {
                framework,
                sensor_start: starts[sim_id],
                seed: sub_seed(seed, sim_id as u64, 0),
                ..base.clone()
            };
            BatchEpisode { sim_id, framework, sensor_start: starts[sim_id], result: run_episode(map, &cfg) }
        })
        .collect();
    Ok(BatchResult { episodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framework_names_round_trip() {
        for f in [Framework::U, Framework::Fi, Framework::FiGp, Framework::BetaSgp { beta: 1.0 }] {
            assert_eq!(f.to_string().parse::<Framework>().unwrap(), f);
        }
        assert_eq!(Framework::BetaSgp { beta: 10.0 }.to_string(), "BETA_SGP_10");
        assert_eq!("beta-sgp".parse::<Framework>().unwrap(), Framework::BetaSgp { beta: 10.0 });
        assert!("gps".parse::<Framework>().is_err());
    }

    #[test]
    fn budget_is_periodic() {
        let cfg = SimConfig::default();
        let total: usize = (0..=70).map(|t| cfg.budget_at(t)).sum();
        assert_eq!(total, 107);
    }

    #[test]
    fn adjacent_goal_finishes_in_one_tick() {
        let map = GridMap::generate(12, 12, 5).unwrap();
        let mut cfg = SimConfig {
            framework: Framework::FiGp,
            actor_start: Cell::new(3, 3),
            goal: Cell::new(4, 3),
            sensor_start: Cell::new(8, 8),
            ..SimConfig::default()
        };
        cfg.actor.fit_epochs_initial = 5;
        cfg.sensor.fit_epochs_initial = 5;
        let rec = run_episode(&map, &cfg).unwrap();
        assert_eq!(rec.t_final, 1);
        assert!(rec.reached_goal);
        assert_eq!(rec.comm_cost, rec.transmissions[0].len());
        assert!(rec.comm_cost >= 49);
        assert_eq!(rec.sensor_trace.len(), 2);
    }
}
