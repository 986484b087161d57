use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::set::{frame_from_direction, Set};
use super::{dot, norm, sub};

/// Lipschitz bound `L` and chart radius `R` of a Lipschitz curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartParams {
    pub lipschitz: f64,
    pub radius: f64,
}

impl ChartParams {
    /// `L >= 2` and `R < 2 alpha`.
    pub fn validate(&self, alpha: f64) -> Result<()> {
        if !(self.lipschitz >= 2.0) {
            return Err(Error::Chart(format!(
                "Lipschitz bound must be at least 2, got {}",
                self.lipschitz
            )));
        }
        if !(self.radius > 0.0 && self.radius < 2.0 * alpha) {
            return Err(Error::Chart(format!(
                "chart radius {} must lie in (0, 2 alpha) with alpha = {alpha}",
                self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartReport {
    pub anchors_checked: usize,
    pub max_slope: f64,
    pub sandwich_samples: usize,
    /// Largest `|x'' - phi(x')| / (L + 1) - dist(x, A)`; non-positive on pass.
    pub lower_excess: f64,
    /// Largest `dist(x, A) - |x'' - phi(x')|`; non-positive on pass.
    pub upper_excess: f64,
}

/// Curve in world coordinates with the frame used to read it as a graph.
pub struct CurveView<'a> {
    pub origin: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
    pub verts: &'a [Vec<f64>],
}

impl CurveView<'_> {
    pub fn to_chart(&self, x: &[f64]) -> Vec<f64> {
        let w = sub(x, &self.origin);
        self.frame.iter().map(|r| dot(r, &w)).collect()
    }

    pub fn to_world(&self, c: &[f64]) -> Vec<f64> {
        let mut x = self.origin.clone();
        for (row, ci) in self.frame.iter().zip(c) {
            for (xj, rj) in x.iter_mut().zip(row) {
                *xj += ci * rj;
            }
        }
        x
    }
}

/// Charts of the curves in `a`: graph descriptors keep their own frame,
/// polylines are read in the frame of their end-to-end chord.
pub fn curve_views(a: &Set) -> Result<Vec<CurveView<'_>>> {
    let mut out = Vec::new();
    let charts = a.charts();
    for c in &charts {
        out.push(CurveView {
            origin: c.origin.clone(),
            frame: c.frame.clone(),
            verts: &c.world,
        });
    }
    let plain: Vec<&[Vec<f64>]> = a
        .polylines()
        .into_iter()
        .filter(|v| !charts.iter().any(|c| std::ptr::eq(c.world.as_slice(), *v)))
        .collect();
    for verts in plain {
        if verts.len() < 2 {
            return Err(Error::Chart("a polyline chart needs two vertices".into()));
        }
        let chord = sub(&verts[verts.len() - 1], &verts[0]);
        let len = norm(&chord);
        if len == 0.0 {
            return Err(Error::Chart("closed polyline has no chord frame".into()));
        }
        let e: Vec<f64> = chord.iter().map(|v| v / len).collect();
        out.push(CurveView {
            origin: verts[0].clone(),
            frame: frame_from_direction(&e),
            verts,
        });
    }
    if out.is_empty() {
        return Err(Error::Chart("set has no curve to chart".into()));
    }
    Ok(out)
}

fn densified(verts: &[Vec<f64>], spacing: f64) -> Vec<Vec<f64>> {
    let mut out = vec![verts[0].clone()];
    for w in verts.windows(2) {
        let n = (norm(&sub(&w[1], &w[0])) / spacing).ceil().max(1.0) as usize;
        for j in 1..=n {
            let t = j as f64 / n as f64;
            out.push(w[0].iter().zip(&w[1]).map(|(a, b)| a + t * (b - a)).collect());
        }
    }
    out
}

/// Graph of the curve inside the cylinder `|c' - a'| < R, |c'' - a''| < 3LR`
/// around an anchor, sorted by the tangential coordinate; fails if it is not
/// a graph with slope at most `L` over the full tangential range.
pub fn local_graph(
    view: &CurveView,
    anchor_chart: &[f64],
    params: &ChartParams,
) -> Result<(Vec<(f64, Vec<f64>)>, f64)> {
    let (l, r) = (params.lipschitz, params.radius);
    let spacing = r / 256.0;
    let mut pts: Vec<(f64, Vec<f64>)> = densified(view.verts, spacing)
        .iter()
        .map(|x| view.to_chart(x))
        .filter_map(|c| {
            let t = c[0] - anchor_chart[0];
            let n: Vec<f64> = c[1..].iter().zip(&anchor_chart[1..]).map(|(a, b)| a - b).collect();
            (t.abs() < r && norm(&n) < 3.0 * l * r).then_some((t, n))
        })
        .collect();
    let anchor_world = view.to_world(anchor_chart);
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut max_slope: f64 = 0.0;
    for w in pts.windows(2) {
        let dt = w[1].0 - w[0].0;
        let dn = norm(&sub(&w[1].1, &w[0].1));
        if dn == 0.0 {
            continue;
        }
        let slope = if dt == 0.0 { f64::INFINITY } else { dn / dt };
        max_slope = max_slope.max(slope);
        if slope > l * (1.0 + 1e-9) {
            return Err(Error::ChartViolation {
                anchor: anchor_world,
                detail: format!(
                    "samples at tangential offsets {:.6} and {:.6} have slope {slope:.4} > L = {l}",
                    w[0].0, w[1].0
                ),
            });
        }
    }
    let covered = pts.first().is_some_and(|p| p.0 <= -r + 2.0 * spacing)
        && pts.last().is_some_and(|p| p.0 >= r - 2.0 * spacing);
    if !covered {
        return Err(Error::ChartViolation {
            anchor: anchor_world,
            detail: "the curve does not cross the chart cylinder".into(),
        });
    }
    Ok((pts, max_slope))
}

/// Linear interpolation of a sorted local graph.
pub fn graph_value(graph: &[(f64, Vec<f64>)], t: f64) -> Vec<f64> {
    let i = graph.partition_point(|p| p.0 <= t).clamp(1, graph.len() - 1);
    let (t0, n0) = (&graph[i - 1].0, &graph[i - 1].1);
    let (t1, n1) = (&graph[i].0, &graph[i].1);
    let w = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
    n0.iter().zip(n1).map(|(a, b)| a + w * (b - a)).collect()
}

/// Anchors on the curve whose chart cylinder is fully crossed by the curve.
pub fn default_anchors(view: &CurveView, radius: f64, count: usize) -> Vec<Vec<f64>> {
    let chart: Vec<Vec<f64>> = view.verts.iter().map(|x| view.to_chart(x)).collect();
    let (tmin, tmax) = chart.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| {
        (a.min(c[0]), b.max(c[0]))
    });
    let lo = tmin + radius;
    let hi = tmax - radius;
    if lo > hi {
        return Vec::new();
    }
    let dense = densified(view.verts, radius / 256.0);
    (0..count)
        .filter_map(|i| {
            let t = if count == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (count - 1) as f64
            };
            dense
                .iter()
                .map(|x| view.to_chart(x))
                .min_by(|a, b| (a[0] - t).abs().total_cmp(&(b[0] - t).abs()))
        })
        .collect()
}

/// Checks that `a` is locally an `L`-Lipschitz graph in every chart and that
/// the distance sandwich `|x'' - phi(x')| / (L + 1) <= dist(x, A) <= |x'' - phi(x')|`
/// holds on a lattice of the inner cylinder `|x'| <= R/4, |x''| <= LR/2`.
/// `anchors` are world points (in chart order of the first view) or `None`
/// for nine evenly spread anchors per curve.
pub fn lipschitz_chart_check(
    a: &Set,
    params: &ChartParams,
    anchors: Option<&[Vec<f64>]>,
) -> Result<ChartReport> {
    let views = curve_views(a)?;
    let mut report = ChartReport {
        anchors_checked: 0,
        max_slope: 0.0,
        sandwich_samples: 0,
        lower_excess: f64::NEG_INFINITY,
        upper_excess: f64::NEG_INFINITY,
    };
    let (l, r) = (params.lipschitz, params.radius);
    let tol = 1e-9 * r.max(1e-300);
    for view in &views {
        let list: Vec<Vec<f64>> = match anchors {
            Some(list) => list.iter().map(|x| view.to_chart(x)).collect(),
            None => default_anchors(view, r, 9),
        };
        if list.is_empty() {
            return Err(Error::Chart(format!(
                "chart radius {r} leaves no anchor with a full chart"
            )));
        }
        for anchor in &list {
            let (graph, slope) = local_graph(view, anchor, params)?;
            report.max_slope = report.max_slope.max(slope);
            report.anchors_checked += 1;
            let k = anchor.len();
            let m = 9usize;
            let lattice = m.pow(k as u32);
            for idx in 0..lattice {
                let mut rem = idx;
                let mut c = Vec::with_capacity(k);
                for axis in 0..k {
                    let u = (rem % m) as f64 / (m - 1) as f64 * 2.0 - 1.0;
                    rem /= m;
                    let half = if axis == 0 { r / 4.0 } else { l * r / 2.0 / (k as f64 - 1.0).sqrt() };
                    c.push(u * half);
                }
                let phi = graph_value(&graph, c[0]);
                let gap = norm(&sub(&c[1..], &phi));
                let world_chart: Vec<f64> = c.iter().zip(anchor).map(|(a, b)| a + b).collect();
                let x = view.to_world(&world_chart);
                let d = a.dist(&x);
                let lower = gap / (l + 1.0) - d;
                let upper = d - gap;
                report.lower_excess = report.lower_excess.max(lower);
                report.upper_excess = report.upper_excess.max(upper);
                report.sandwich_samples += 1;
                if lower > tol || upper > tol {
                    return Err(Error::ChartViolation {
                        anchor: view.to_world(anchor),
                        detail: format!(
                            "distance sandwich fails at {x:?}: dist {d:.6e}, graph gap {gap:.6e}"
                        ),
                    });
                }
            }
        }
    }
    Ok(report)
}
