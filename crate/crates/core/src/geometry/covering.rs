use std::collections::HashMap;

use crate::error::{Error, Result};

use super::set::Set;
use super::{norm, sub};

/// Size of a greedy `r`-net of the points: every point lies within `r` of a
/// center and centers are more than `r` apart.
pub fn greedy_net_size(points: &[Vec<f64>], r: f64) -> usize {
    if points.is_empty() {
        return 0;
    }
    let k = points[0].len();
    let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|v| (v / r).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut centers: Vec<&[f64]> = Vec::new();
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(k as u32))
        .map(|mut idx| {
            (0..k)
                .map(|_| {
                    let o = (idx % 3) as i64 - 1;
                    idx /= 3;
                    o
                })
                .collect()
        })
        .collect();
    for p in points {
        let base = key(p);
        let covered = offsets.iter().any(|o| {
            let cell: Vec<i64> = base.iter().zip(o).map(|(a, b)| a + b).collect();
            grid.get(&cell).is_some_and(|ids| {
                ids.iter().any(|&c| norm(&sub(p, centers[c])) <= r)
            })
        });
        if !covered {
            grid.entry(base).or_default().push(centers.len());
            centers.push(p);
        }
    }
    centers.len()
}

/// Greedy upper estimate of the covering number `N_r(G)` from a sample of
/// `G` fine enough for `r`.
pub fn covering_number(g: &Set, r: f64) -> Result<usize> {
    if !(r > 0.0) {
        return Err(Error::Argument(format!("covering radius must be positive, got {r}")));
    }
    Ok(greedy_net_size(&g.sample(r / 8.0), r))
}

/// Default scale pairs: R in {1, 1/3, 1/10} times the diameter bound of G,
/// with R/r from 10 to 1000 in half decades.
pub fn default_scale_pairs(g: &Set) -> Vec<(f64, f64)> {
    let d = g.diameter_bound().max(1e-12);
    let mut out = Vec::new();
    for f in [1.0, 1.0 / 3.0, 0.1] {
        for j in 2..=6 {
            let big = d * f;
            out.push((big, big / 10f64.powf(j as f64 / 2.0)));
        }
    }
    out
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Least-squares slope of `log N_r(B(x, R) cap G)` against `log(R/r)`,
/// maximized over up to `max_centers` probe centers taken from G.
pub fn assouad_estimate(g: &Set, pairs: &[(f64, f64)], max_centers: usize) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientScales(pairs.len()));
    }
    let ratios: Vec<f64> = pairs.iter().map(|(big, small)| big / small).collect();
    let span = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < 99.99 || ratios.iter().any(|&q| q < 10.0 - 1e-9) {
        return Err(Error::InsufficientScales(pairs.len()));
    }
    let r_min = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let sample = g.sample(r_min / 8.0);
    let stride = (sample.len() / max_centers.max(1)).max(1);
    let xs: Vec<f64> = ratios.iter().map(|q| q.ln()).collect();
    let mut best = f64::NEG_INFINITY;
    for x in sample.iter().step_by(stride).take(max_centers.max(1)) {
        let ys: Vec<f64> = pairs
            .iter()
            .map(|&(big, small)| {
                let local: Vec<Vec<f64>> = sample
                    .iter()
                    .filter(|p| norm(&sub(p, x)) < big)
                    .cloned()
                    .collect();
                (greedy_net_size(&local, small).max(1) as f64).ln()
            })
            .collect();
        best = best.max(ls_slope(&xs, &ys));
    }
    Ok(best)
}
