use std::collections::HashMap;

use super::kernel::Point;

/// Inverse-variance weight used for noise-free observations.
const MAX_PRECISION: f64 = 1e300;

/// Training data for a GP: unique input locations, targets and the known
/// per-point measurement noise.
///
/// Re-observing a location merges the measurement into the existing entry by
/// inverse-variance weighted averaging, so the stored target is the mean of
/// all readings and the stored noise variance shrinks accordingly. With
/// equal noise this is the plain average.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    inputs: Vec<Point>,
    weight: Vec<f64>,
    weighted_sum: Vec<f64>,
    index: HashMap<(u64, u64), usize>,
}

fn key(p: Point) -> (u64, u64) {
    // +0.0 and -0.0 must collide
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a dataset with a common noise level, merging duplicate inputs.
    pub fn from_points(inputs: &[Point], targets: &[f64], noise_std: f64) -> Self {
        assert_eq!(inputs.len(), targets.len(), "inputs and targets differ in length");
        let mut d = Self::new();
        for (&x, &y) in inputs.iter().zip(targets) {
            d.push(x, y, noise_std);
        }
        d
    }

    /// Adds one measurement; returns `true` when the location is new.
    pub fn push(&mut self, x: Point, y: f64, noise_std: f64) -> bool {
        let var = noise_std * noise_std;
        let w = if var > 0.0 { (1.0 / var).min(MAX_PRECISION) } else { MAX_PRECISION };
        match self.index.get(&key(x)) {
            Some(&i) => {
                self.weight[i] += w;
                self.weighted_sum[i] += w * y;
                false
            }
            None => {
                self.index.insert(key(x), self.inputs.len());
                self.inputs.push(x);
                self.weight.push(w);
                self.weighted_sum.push(w * y);
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Point] {
        &self.inputs
    }

    pub fn target(&self, i: usize) -> f64 {
        self.weighted_sum[i] / self.weight[i]
    }

    pub fn targets(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.target(i)).collect()
    }

    /// Known measurement noise variance of each (merged) point.
    pub fn noise_var(&self) -> Vec<f64> {
        self.weight.iter().map(|w| 1.0 / w).collect()
    }

    pub fn position(&self, x: Point) -> Option<usize> {
        self.index.get(&key(x)).copied()
    }

    pub fn contains(&self, x: Point) -> bool {
        self.index.contains_key(&key(x))
    }

    /// Subset by index, preserving the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut d = Self::new();
        for &i in indices {
            d.index.insert(key(self.inputs[i]), d.inputs.len());
            d.inputs.push(self.inputs[i]);
            d.weight.push(self.weight[i]);
            d.weighted_sum.push(self.weighted_sum[i]);
        }
        d
    }

    /// Deterministic evenly-strided subset of at most `max_points` entries.
    pub fn thinned(&self, max_points: usize) -> Self {
        let n = self.len();
        if n <= max_points || max_points == 0 {
            return self.clone();
        }
        let idx: Vec<usize> = (0..max_points).map(|j| j * n / max_points).collect();
        self.subset(&idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_averaged() {
        let d = Dataset::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]], &[0.2, 0.5, 0.4], 0.1);
        assert_eq!(d.len(), 2);
        assert!((d.target(0) - 0.3).abs() < 1e-15);
        assert!((d.noise_var()[0] - 0.005).abs() < 1e-15);
        assert!((d.noise_var()[1] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn noise_free_points_have_negligible_variance() {
        let d = Dataset::from_points(&[[0.0, 0.0]], &[0.9], 0.0);
        assert!(d.noise_var()[0] < 1e-299);
        assert_eq!(d.target(0), 0.9);
    }

    #[test]
    fn thinning_is_strided() {
        let pts: Vec<Point> = (0..10).map(|i| [i as f64, 0.0]).collect();
        let d = Dataset::from_points(&pts, &[0.0; 10], 0.1);
        let t = d.thinned(4);
        assert_eq!(t.inputs(), &[[0.0, 0.0], [2.0, 0.0], [5.0, 0.0], [7.0, 0.0]]);
        assert_eq!(d.thinned(20).len(), 10);
    }
}
