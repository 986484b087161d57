//! Tabulated radial bounds for fast evaluation over grids.

use rayon::prelude::*;

use crate::geometry::log_space;

/// Non-increasing bound `d -> b(d)` sampled at log-spaced nodes. Evaluation
/// returns the value at the largest node not exceeding `d`, which can only
/// overestimate a non-increasing bound; below the first node it is `+inf`.
#[derive(Debug, Clone)]
pub struct FloorTable {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl FloorTable {
    pub fn build<F>(f: F, d_min: f64, d_max: f64, n: usize) -> Self
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let nodes = log_space(d_min, d_max, n.max(2));
        let values = nodes.par_iter().map(|&d| f(d)).collect();
        FloorTable { nodes, values }
    }

    pub fn eval(&self, d: f64) -> f64 {
        let i = self.nodes.partition_point(|&x| x <= d);
        if i == 0 {
            f64::INFINITY
        } else {
            self.values[i - 1]
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_lookup_never_underestimates() {
        let t = FloorTable::build(|d| 1.0 / d, 1e-3, 1.0, 64);
        for i in 0..1000 {
            let d = 1e-3 + i as f64 * 1e-3;
            assert!(t.eval(d) >= 1.0 / d);
        }
        assert!(t.eval(1e-4).is_infinite());
    }
}
