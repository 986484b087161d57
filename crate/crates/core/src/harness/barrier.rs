use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    curve_views, graph_value, lipschitz_chart_check, local_graph, norm, segment_dist, sub, ChartParams, CurveView,
    Set,
};
use crate::monotone::DecreasingFn;
use crate::rng::shard_rng;

/// Normal half-width of the barrier domain in units of `L r`; the domain
/// sits between the cylinders of widths `2 L r` and `3 L r`.
pub const DOMAIN_WIDTH: f64 = 2.5;

#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    pub anchor: Vec<f64>,
    pub r: f64,
    pub samples: usize,
    pub excluded: usize,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// `min v(x) - g(r) - g(dist(x, A))`.
    pub lemma_min_margin: f64,
    /// `max |x'' - phi(x')| / (L + 1) - dist(x, A)`.
    pub sandwich_lower_excess: f64,
    /// `max dist(x, A) - |x'' - phi(x')|`.
    pub sandwich_upper_excess: f64,
    /// `max(|x - y|, |x - z|) / ((4L + 2) r)`.
    pub cross_ratio: f64,
}

fn on_view(view: &CurveView, x: &[f64]) -> f64 {
    view.verts
        .windows(2)
        .map(|w| segment_dist(x, &w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Point of the boundary of `{|t| <= r, |n| <= w}` in anchor-relative chart
/// coordinates, drawn with density proportional to area.
fn boundary_point<R: Rng>(rng: &mut R, k: usize, r: f64, w: f64) -> Vec<f64> {
    if k == 2 {
        let (ends, sides) = (2.0 * w, 2.0 * r);
        let u: f64 = rng.random::<f64>() * 2.0 * (ends + sides);
        let s = u % (ends + sides);
        let sign = if u < ends + sides { -1.0 } else { 1.0 };
        if s < ends {
            vec![sign * r, s - w]
        } else {
            vec![s - ends - r, sign * w]
        }
    } else {
        let ends = 2.0 * std::f64::consts::PI * w * w;
        let lateral = 2.0 * std::f64::consts::PI * w * 2.0 * r;
        let u: f64 = rng.random::<f64>() * (ends + lateral);
        if u < ends {
            let t = if u < 0.5 * ends { -r } else { r };
            let rho = w * rng.random::<f64>().sqrt();
            let th = rng.random::<f64>() * std::f64::consts::TAU;
            let mut c = vec![t, rho * th.cos(), rho * th.sin()];
            c.truncate(k);
            c
        } else {
            let t = rng.random_range(-r..r);
            let th = rng.random::<f64>() * std::f64::consts::TAU;
            vec![t, w * th.cos(), w * th.sin()]
        }
    }
}

/// Checks the barrier lemma `g(dist(x, A)) <= v(x) - g(r)` with
/// `v(x) = g(|x - y|/(8L)) + g(|x - z|/(8L))`, the chart distance sandwich
/// and the cross bound `max(|x - y|, |x - z|) <= (4L + 2) r` at `samples`
/// points of the boundary of the barrier domain around `anchor`, skipping
/// points within `1e-3 r` of the crossings `y`, `z`.
pub fn barrier_check(
    g: &DecreasingFn,
    a: &Set,
    params: &ChartParams,
    anchor: &[f64],
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<BarrierReport> {
    let l = params.lipschitz;
    if !(r > 0.0 && r < params.radius / (8.0 * l)) {
        return Err(Error::Argument(format!(
            "barrier radius {r} must lie in (0, R/(8L)) = (0, {})",
            params.radius / (8.0 * l)
        )));
    }
    let views = curve_views(a)?;
    let view = views
        .iter()
        .min_by(|p, q| on_view(p, anchor).total_cmp(&on_view(q, anchor)))
        .expect("curve_views is non-empty");
    if on_view(view, anchor) > 1e-9 * params.radius {
        return Err(Error::Argument(format!("anchor {anchor:?} is not on the set")));
    }
    let chart_err = |e: Error| match e {
        Error::ChartViolation { anchor, detail } => Error::BarrierViolation {
            kind: "chart".into(),
            witness: anchor,
            detail,
        },
        other => other,
    };
    lipschitz_chart_check(a, params, Some(&[anchor.to_vec()])).map_err(chart_err)?;
    let ac = view.to_chart(anchor);
    let (graph, _) = local_graph(view, &ac, params).map_err(chart_err)?;
    let k = ac.len();
    let world = |c: &[f64]| {
        let shifted: Vec<f64> = c.iter().zip(&ac).map(|(p, q)| p + q).collect();
        view.to_world(&shifted)
    };
    let end = |t: f64| {
        let mut c = vec![t];
        c.extend(graph_value(&graph, t));
        world(&c)
    };
    let (y, z) = (end(-r), end(r));
    let w = DOMAIN_WIDTH * l * r;
    let gr = g.value(r);
    let cross_cap = (4.0 * l + 2.0) * r;
    let mut report = BarrierReport {
        anchor: anchor.to_vec(),
        r,
        samples: 0,
        excluded: 0,
        y: y.clone(),
        z: z.clone(),
        lemma_min_margin: f64::INFINITY,
        sandwich_lower_excess: f64::NEG_INFINITY,
        sandwich_upper_excess: f64::NEG_INFINITY,
        cross_ratio: 0.0,
    };
    let mut rng = shard_rng(seed, 0);
    for _ in 0..samples {
        let c = boundary_point(&mut rng, k, r, w);
        let x = world(&c);
        let (dy, dz) = (norm(&sub(&x, &y)), norm(&sub(&x, &z)));
        if dy < 1e-3 * r || dz < 1e-3 * r {
            report.excluded += 1;
            continue;
        }
        report.samples += 1;
        let d = a.dist(&x);
        let gap = norm(&sub(&c[1..], &graph_value(&graph, c[0])));
        let tol = 1e-9 * (r + gap);
        let lower = gap / (l + 1.0) - d;
        let upper = d - gap;
        report.sandwich_lower_excess = report.sandwich_lower_excess.max(lower);
        report.sandwich_upper_excess = report.sandwich_upper_excess.max(upper);
        if lower > tol || upper > tol {
            return Err(Error::BarrierViolation {
                kind: "sandwich".into(),
                witness: x,
                detail: format!("dist {d:.6e} outside [{:.6e}, {gap:.6e}]", gap / (l + 1.0)),
            });
        }
        let cross = dy.max(dz);
        report.cross_ratio = report.cross_ratio.max(cross / cross_cap);
        if cross > cross_cap * (1.0 + 1e-12) {
            return Err(Error::BarrierViolation {
                kind: "cross_bound".into(),
                witness: x,
                detail: format!("max(|x-y|, |x-z|) = {cross:.6e} > (4L+2) r = {cross_cap:.6e}"),
            });
        }
        let v = g.value(dy / (8.0 * l)) + g.value(dz / (8.0 * l));
        let lhs = g.value(d);
        let margin = v - gr - lhs;
        report.lemma_min_margin = report.lemma_min_margin.min(margin);
        if margin < -1e-9 * (v.abs() + gr.abs()) {
            return Err(Error::BarrierViolation {
                kind: "lemma".into(),
                witness: x,
                detail: format!("g(dist) = {lhs:.6e} > v - g(r) = {:.6e}", v - gr),
            });
        }
    }
    Ok(report)
}
