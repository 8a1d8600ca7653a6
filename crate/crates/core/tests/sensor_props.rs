use std::collections::BTreeSet;

use gprelay_core::grid::{Action, Cell, GridDims, GridMap};
use gprelay_core::roi::roi_path_agnostic;
use gprelay_core::sensor::{
    perceive, select_target, step_toward, update_frontiers, update_overlap, Relay, SensorConfig, SensorState,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frontier_by_definition(explored: &[bool], dims: GridDims) -> BTreeSet<Cell> {
    dims.cells()
        .filter(|&c| !explored[dims.index(c)] && dims.neighbors4(c).any(|n| explored[dims.index(n)]))
        .collect()
}

#[test]
fn incremental_frontier_matches_the_set_definition() {
    let dims = GridDims::new(16, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..20 {
        let mut explored = vec![false; dims.len()];
        let mut frontier = BTreeSet::new();
        let mut at = Cell::new(rng.random_range(0..16), rng.random_range(0..16));
        for _ in 0..30 {
            let newly: Vec<Cell> = dims.window(at, 3).into_iter().filter(|c| !explored[dims.index(*c)]).collect();
            for c in &newly {
                explored[dims.index(*c)] = true;
            }
            update_frontiers(&mut frontier, &explored, dims, &newly);
            assert_eq!(frontier, frontier_by_definition(&explored, dims));
            let a = [Action::Up, Action::Down, Action::Left, Action::Right][rng.random_range(0..4)];
            at = a.apply(at, dims);
        }
    }
}

#[test]
fn single_interior_cell_has_four_frontier_cells() {
    let dims = GridDims::new(5, 5);
    let mut explored = vec![false; 25];
    explored[dims.index(Cell::new(2, 2))] = true;
    let mut f = BTreeSet::new();
    update_frontiers(&mut f, &explored, dims, &[Cell::new(2, 2)]);
    assert_eq!(f.len(), 4);
    let all: Vec<Cell> = dims.cells().collect();
    update_frontiers(&mut f, &[true; 25], dims, &all);
    assert!(f.is_empty());
}

#[test]
fn target_matches_brute_force_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..50 {
        let roi = roi_path_agnostic([rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)], 4.0).unwrap();
        let pos = Cell::new(10, 10);
        let mut cells = BTreeSet::new();
        while cells.len() < 20 {
            let c = Cell::new(rng.random_range(0..20), rng.random_range(0..20));
            if c != pos {
                cells.insert(c);
            }
        }
        let frontier: Vec<Cell> = cells.into_iter().collect();
        let sigma: Vec<f64> = frontier.iter().map(|_| rng.random_range(0.0..0.3)).collect();
        let p: Vec<f64> = frontier.iter().map(|c| roi.density(c.point())).collect();
        let max_p = p.iter().cloned().fold(0.0, f64::max);
        let max_s = sigma.iter().cloned().fold(0.0, f64::max);
        let gamma = 0.05 * max_p / max_s;
        let scores: Vec<f64> = (0..frontier.len())
            .map(|i| {
                let d = ((frontier[i].x as f64 - 10.0).powi(2) + (frontier[i].y as f64 - 10.0).powi(2)).sqrt();
                (p[i] + gamma * sigma[i]) / d
            })
            .collect();
        let best = (0..frontier.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
        assert_eq!(select_target(&frontier, &sigma, pos, &roi, 0.05).unwrap(), frontier[best]);
    }
}

#[test]
fn flat_task_prior_without_exploration_picks_the_nearest_frontier() {
    let roi = roi_path_agnostic([0.0, 0.0], 1e6).unwrap();
    let frontier = vec![Cell::new(9, 0), Cell::new(4, 7), Cell::new(6, 2), Cell::new(0, 9)];
    let t = select_target(&frontier, &[0.0; 4], Cell::new(5, 4), &roi, 0.05).unwrap();
    assert_eq!(t, Cell::new(6, 2));
}

#[test]
fn target_tie_cases() {
    let roi = roi_path_agnostic([6.0, 3.0], 2.0).unwrap();
    let frontier = vec![Cell::new(0, 3), Cell::new(6, 3)];
    assert_eq!(select_target(&frontier, &[0.1, 0.1], Cell::new(3, 3), &roi, 0.05).unwrap(), Cell::new(6, 3));
    assert_eq!(select_target(&frontier[..1], &[0.1], Cell::new(3, 3), &roi, 0.05).unwrap(), Cell::new(0, 3));
    assert!(select_target(&[], &[], Cell::new(3, 3), &roi, 0.05).is_err());
}

#[test]
fn step_projection_cases() {
    let o = Cell::new(5, 5);
    assert_eq!(step_toward(o, Cell::new(8, 6)), Action::Right);
    assert_eq!(step_toward(o, Cell::new(5, 3)), Action::Down);
    assert_eq!(step_toward(o, Cell::new(7, 7)), Action::Right);
    assert_eq!(step_toward(o, Cell::new(4, 9)), Action::Up);
}

#[test]
fn perception_window_sizes() {
    let map = GridMap::generate(16, 16, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(perceive(&map, Cell::new(8, 8), 7, 0.05, &mut rng).len(), 49);
    assert_eq!(perceive(&map, Cell::new(0, 0), 7, 0.05, &mut rng).len(), 16);
    for (c, v) in perceive(&map, Cell::new(3, 3), 5, 0.0, &mut rng) {
        assert_eq!(v, map.get(c));
    }
}

#[test]
fn overlap_is_a_growing_union() {
    let dims = GridDims::new(10, 10);
    let mut ov = vec![false; 100];
    update_overlap(&mut ov, dims, &[], Cell::new(5, 5), 5);
    assert_eq!(ov.iter().filter(|&&b| b).count(), 25);
    let a = Cell::new(0, 0);
    let b = Cell::new(9, 9);
    update_overlap(&mut ov, dims, &[a, b], Cell::new(5, 5), 5);
    let snapshot = ov.clone();
    assert!(ov[dims.index(a)] && ov[dims.index(b)]);
    update_overlap(&mut ov, dims, &[a, b], Cell::new(5, 5), 5);
    assert_eq!(ov, snapshot);
}

fn run_selective(map: &GridMap, budgets: &[usize], seed: u64) -> (SensorState, Vec<Vec<Cell>>) {
    let cfg = SensorConfig { sigma_tilde: 4.0, fit_epochs_initial: 40, fit_epochs_warm: 10, ..SensorConfig::default() };
    let mut s = SensorState::new(cfg, map, Cell::new(3, 3), Cell::new(12, 12), seed).unwrap();
    let actor_path: Vec<Cell> = (1..12).map(|i| Cell::new(i, 1)).collect();
    let mut sent = Vec::new();
    for &b in budgets {
        let step = s.tick(map, &actor_path, Cell::new(1, 1), b).unwrap();
        assert!(step.transmitted.len() <= b);
        sent.push(step.transmitted.iter().map(|&(c, _)| c).collect());
        let dims = map.dims();
        let explored: Vec<bool> = dims.cells().map(|c| s.is_explored(c)).collect();
        assert_eq!(*s.frontier(), frontier_by_definition(&explored, dims));
    }
    (s, sent)
}

#[test]
fn selective_relay_respects_budgets_and_never_repeats() {
    let map = GridMap::generate(16, 16, 3).unwrap();
    let budgets = [2, 1, 0, 2, 1, 3, 2, 1];
    let (s, sent) = run_selective(&map, &budgets, 9);
    let all: Vec<Cell> = sent.iter().flatten().copied().collect();
    let unique: BTreeSet<Cell> = all.iter().copied().collect();
    assert_eq!(unique.len(), all.len());
    assert!(sent[2].is_empty());
    for c in &all {
        assert!(s.is_explored(*c));
        assert!(s.transmitted_mask()[map.dims().index(*c)]);
    }
    // the Actor's 5x5 window around (1, 1) is never candidate material
    for c in map.dims().window(Cell::new(1, 1), 5) {
        assert!(!all.contains(&c));
    }
}

#[test]
fn sensor_ticks_are_reproducible() {
    let map = GridMap::generate(16, 16, 4).unwrap();
    let (_, a) = run_selective(&map, &[2, 1, 2, 1], 5);
    let (_, b) = run_selective(&map, &[2, 1, 2, 1], 5);
    assert_eq!(a, b);
}

#[test]
fn full_relay_sends_each_new_cell_once() {
    let map = GridMap::generate(16, 16, 5).unwrap();
    let cfg = SensorConfig { relay: Relay::Full, ..SensorConfig::default() };
    let mut s = SensorState::new(cfg, &map, Cell::new(8, 8), Cell::new(15, 15), 1).unwrap();
    let mut total = BTreeSet::new();
    for _ in 0..10 {
        let step = s.tick(&map, &[], Cell::new(0, 0), 0).unwrap();
        for (c, _) in step.transmitted {
            assert!(total.insert(c));
        }
    }
    let explored = map.dims().cells().filter(|&c| s.is_explored(c)).count();
    assert_eq!(total.len(), explored);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_blobs_have_consistent_frontiers(seed in 0u64..100_000) {
        let dims = GridDims::new(16, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut explored = vec![false; dims.len()];
        let mut frontier = BTreeSet::new();
        for _ in 0..rng.random_range(1..12) {
            let c = Cell::new(rng.random_range(0..16), rng.random_range(0..16));
            let newly: Vec<Cell> = dims.window(c, 3).into_iter().filter(|c| !explored[dims.index(*c)]).collect();
            for n in &newly {
                explored[dims.index(*n)] = true;
            }
            update_frontiers(&mut frontier, &explored, dims, &newly);
        }
        prop_assert_eq!(frontier, frontier_by_definition(&explored, dims));
    }
}
