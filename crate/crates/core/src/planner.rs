//! Actor-side map post-processing and minimum-cost path search.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::gp::GaussianPrediction;
use crate::grid::{Cell, GridDims};

/// Clips the predicted mean to `[0, 1]` and resets cells whose predictive
/// standard deviation exceeds `sigma_th` to the initial belief `y0`.
pub fn truncate(prediction: &GaussianPrediction, sigma_th: f64, y0: f64) -> Vec<f64> {
    prediction
        .mean
        .iter()
        .zip(&prediction.variance)
        .map(|(&m, &v)| if v.max(0.0).sqrt() > sigma_th { y0 } else { m.clamp(0.0, 1.0) })
        .collect()
}

/// Per-cell traversal cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    dims: GridDims,
    cost: Vec<f64>,
    feasible: Vec<bool>,
}

impl CostField {
    /// Builds a field directly from costs; every cell counts as feasible.
    pub fn from_costs(dims: GridDims, cost: Vec<f64>) -> Self {
        assert_eq!(cost.len(), dims.len(), "cost field size mismatch");
        let feasible = vec![true; cost.len()];
        Self { dims, cost, feasible }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn cost(&self, c: Cell) -> f64 {
        self.cost[self.dims.index(c)]
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn is_feasible(&self, c: Cell) -> bool {
        self.feasible[self.dims.index(c)]
    }

    /// Sum of the costs of the entered cells.
    pub fn path_cost(&self, path: &[Cell]) -> f64 {
        path.iter().map(|&c| self.cost(c)).sum()
    }
}

/// Cells with value `≤ ε` cost `value + a`; all others cost `N(ε + a)`,
/// which exceeds any feasible path on an `N`-cell grid.
pub fn build_cost_field(dims: GridDims, truncated: &[f64], epsilon: f64, a: f64, y0: f64) -> Result<CostField> {
    if !(epsilon > y0 && epsilon <= 1.0) {
        return Err(Error::InvalidThreshold { epsilon, y0 });
    }
    assert_eq!(truncated.len(), dims.len(), "map size mismatch");
    let penalty = dims.len() as f64 * (epsilon + a);
    let feasible: Vec<bool> = truncated.iter().map(|&v| v <= epsilon).collect();
    let cost = truncated
        .iter()
        .zip(&feasible)
        .map(|(&v, &ok)| if ok { v + a } else { penalty })
        .collect();
    Ok(CostField { dims, cost, feasible })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over the 4-connected grid. The returned path excludes `start`
/// and ends at `goal`; it is empty when `start == goal`. Equal-cost
/// frontier entries are expanded in `(row, column)` order.
pub fn shortest_path(costs: &CostField, start: Cell, goal: Cell) -> Vec<Cell> {
    let dims = costs.dims;
    assert!(dims.contains(start) && dims.contains(goal), "start or goal out of bounds");
    if start == goal {
        return Vec::new();
    }
    let mut dist = vec![f64::INFINITY; dims.len()];
    let mut prev = vec![usize::MAX; dims.len()];
    let mut done = vec![false; dims.len()];
    let mut heap = BinaryHeap::new();
    dist[dims.index(start)] = 0.0;
    heap.push(Reverse((Dist(0.0), start)));
    while let Some(Reverse((Dist(d), c))) = heap.pop() {
        let ci = dims.index(c);
        if done[ci] {
            continue;
        }
        done[ci] = true;
        if c == goal {
            break;
        }
        for n in dims.neighbors4(c) {
            let ni = dims.index(n);
            let nd = d + costs.cost[ni];
            if !done[ni] && nd < dist[ni] {
                dist[ni] = nd;
                prev[ni] = ci;
                heap.push(Reverse((Dist(nd), n)));
            }
        }
    }
    let mut path = Vec::new();
    let mut at = dims.index(goal);
    let si = dims.index(start);
    while at != si {
        path.push(dims.cell(at));
        at = prev[at];
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_cases() {
        let p = GaussianPrediction { mean: vec![1.3, 0.2, -0.1], variance: vec![1e-4, 0.25, 1e-4] };
        assert_eq!(truncate(&p, 0.14, 0.5), vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn cost_cases() {
        let dims = GridDims::new(64, 64);
        let mut v = vec![0.3; dims.len()];
        v[1] = 0.6;
        v[2] = 0.501;
        let f = build_cost_field(dims, &v, 0.501, 0.1, 0.5).unwrap();
        assert!((f.cost(Cell::new(0, 0)) - 0.4).abs() < 1e-15);
        assert!((f.cost(Cell::new(1, 0)) - 2461.696).abs() < 1e-9);
        assert!(!f.is_feasible(Cell::new(1, 0)));
        assert!(f.is_feasible(Cell::new(2, 0)));
        assert!((f.cost(Cell::new(2, 0)) - 0.601).abs() < 1e-15);
        assert!(matches!(build_cost_field(dims, &v, 0.5, 0.1, 0.5), Err(Error::InvalidThreshold { .. })));
    }

    #[test]
    fn corridor_and_adjacent_goal() {
        let dims = GridDims::new(6, 1);
        let f = CostField::from_costs(dims, vec![0.25; 6]);
        let p = shortest_path(&f, Cell::new(0, 0), Cell::new(5, 0));
        assert_eq!(p.len(), 5);
        assert!((f.path_cost(&p) - 1.25).abs() < 1e-15);
        assert_eq!(shortest_path(&f, Cell::new(2, 0), Cell::new(3, 0)), vec![Cell::new(3, 0)]);
    }

    #[test]
    fn routes_through_gap() {
        let dims = GridDims::new(5, 5);
        let mut v = vec![0.0; 25];
        for y in 0..5 {
            if y != 3 {
                v[dims.index(Cell::new(2, y))] = 1.0;
            }
        }
        let f = build_cost_field(dims, &v, 0.501, 0.1, 0.5).unwrap();
        let p = shortest_path(&f, Cell::new(0, 0), Cell::new(4, 0));
        assert!(p.contains(&Cell::new(2, 3)));
        assert!(p.iter().all(|&c| f.is_feasible(c)));
    }
}
