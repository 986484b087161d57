use rayon::prelude::*;

use crate::monotone::DecreasingFn;
use crate::perron::{
    discrete_subharmonic_check_with, margin_summary, Grid, MarginReport, NodeClass, SubharmonicReport,
};

use super::testfn::TestFunction;

/// Slack of the sub-mean test for exactly harmonic kernels, relative to the
/// largest neighbour difference; the stencil error is smaller by `(h/r)^3`.
pub const SUBMEAN_REL_TOL: f64 = 0.05;

/// Node margins `bound(x) - u(x)` over non-ghost nodes where `bound` gives
/// a value.
pub fn node_margins<B>(grid: &Grid, u: &TestFunction, bound: B) -> Vec<(usize, f64)>
where
    B: Fn(&[f64]) -> Option<f64> + Sync,
{
    (0..grid.len())
        .into_par_iter()
        .filter(|&i| grid.class(i) != NodeClass::Ghost)
        .filter_map(|i| {
            let x = grid.point(i);
            bound(&x).map(|b| (i, b - u.eval_node(i, &x)))
        })
        .collect()
}

/// `g(dist(x, S)) - u(x)` on nodes with `0 < dist(x, S) < alpha`.
pub fn hypothesis_check<D>(u: &TestFunction, g: &DecreasingFn, dist_s: D, alpha: f64, grid: &Grid) -> MarginReport
where
    D: Fn(&[f64]) -> f64 + Sync,
{
    let m = node_margins(grid, u, |x| {
        let d = dist_s(x);
        (d > 0.0 && d < alpha).then(|| g.value(d))
    });
    margin_summary(&m, grid, 0.0)
}

/// `h(dist(x, B)) - u(x)` on nodes with `0 < dist(x, B) < tau`; margins
/// below `-allowance` are violations.
pub fn conclusion_check<H, D>(u: &TestFunction, h: H, tau: f64, dist_b: D, grid: &Grid, allowance: f64) -> MarginReport
where
    H: Fn(f64) -> f64 + Sync,
    D: Fn(&[f64]) -> f64 + Sync,
{
    let m = node_margins(grid, u, |x| {
        let d = dist_b(x);
        (d > 0.0 && d < tau).then(|| h(d))
    });
    margin_summary(&m, grid, allowance)
}

/// Sub-mean test of `u` on the grid, skipping nodes within two cells (max
/// norm) of a pole or zero.
pub fn test_function_subharmonic(u: &TestFunction, grid: &Grid) -> SubharmonicReport {
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| u.eval_node(i, &grid.point(i)))
        .collect();
    let sing = u.singular_points();
    let reach = 2.0 * grid.h * (1.0 + 1e-9);
    let near = |i: usize| {
        let x = grid.point(i);
        sing.iter()
            .any(|p| p.iter().zip(&x).all(|(a, b)| (a - b).abs() <= reach))
    };
    let rel = match u {
        TestFunction::GridField { .. } => 0.0,
        _ => SUBMEAN_REL_TOL,
    };
    let osc: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if grid.class(i) == NodeClass::Ghost || !grid.has_stencil(i) {
                return 0.0;
            }
            grid.neighbors(i)
                .map(|j| (values[j] - values[i]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    discrete_subharmonic_check_with(&values, grid, |i, _| 1e-12 + rel * osc[i], near)
}
