use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::index::KdTree;
use super::{dot, norm, sub};

/// Chart profile of a Lipschitz graph over a one-dimensional parameter.
/// Closed forms act on the first normal coordinate and leave the others 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartProfile {
    /// One row of `k - 1` normal coordinates per sample.
    Values { values: Vec<Vec<f64>> },
    Linear { slope: f64 },
    Abs { slope: f64 },
    /// Triangle wave `slope * dist(s, period * Z)`.
    Sawtooth { slope: f64, period: f64 },
}

impl ChartProfile {
    fn first(&self, s: f64) -> f64 {
        match self {
            ChartProfile::Values { .. } => unreachable!(),
            ChartProfile::Linear { slope } => slope * s,
            ChartProfile::Abs { slope } => slope * s.abs(),
            ChartProfile::Sawtooth { slope, period } => {
                slope * (s - period * (s / period).round()).abs()
            }
        }
    }
}

/// Compact set descriptor as it appears in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetDescr {
    PointCloud {
        points: Vec<Vec<f64>>,
    },
    Polyline {
        vertices: Vec<Vec<f64>>,
    },
    /// Graph `{origin + frame^T (s, phi(s))}` over `s in [t_min, t_max]`,
    /// sampled at `samples` uniform parameters. `frame` rows are the chart
    /// axes in world coordinates (identity by default).
    LipGraph {
        dim: usize,
        lipschitz: f64,
        t_min: f64,
        t_max: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        profile: ChartProfile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frame: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        origin: Option<Vec<f64>>,
    },
    /// Self-similar dust: `corners` is 2 (copies along the first axis,
    /// centered in the others) or `2^k` (all box corners).
    CantorDust {
        corners: usize,
        ratio: f64,
        depth: u32,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    UnionOf {
        members: Vec<SetDescr>,
    },
}

fn default_samples() -> usize {
    257
}

/// Sampled chart of a Lipschitz graph, in chart and world coordinates.
#[derive(Debug, Clone)]
pub struct Chart {
    pub origin: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
    pub lipschitz: f64,
    pub params: Vec<f64>,
    pub normals: Vec<Vec<f64>>,
    pub world: Vec<Vec<f64>>,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    /// Chart coordinates of a world point.
    pub fn to_chart(&self, x: &[f64]) -> Vec<f64> {
        let w = sub(x, &self.origin);
        self.frame.iter().map(|row| dot(row, &w)).collect()
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

    /// Piecewise-linear profile at chart parameter `s`, `None` off the chart.
    pub fn phi(&self, s: f64) -> Option<Vec<f64>> {
        let p = &self.params;
        if s < p[0] || s > p[p.len() - 1] {
            return None;
        }
        let i = p.partition_point(|&t| t <= s).clamp(1, p.len() - 1);
        let w = (s - p[i - 1]) / (p[i] - p[i - 1]);
        Some(
            self.normals[i - 1]
                .iter()
                .zip(&self.normals[i])
                .map(|(a, b)| a + w * (b - a))
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
enum Part {
    Points { pts: Vec<Vec<f64>>, tree: Option<KdTree> },
    Polyline { verts: Vec<Vec<f64>> },
    Graph(Chart),
}

/// A resolved compact set with a distance oracle.
#[derive(Debug, Clone)]
pub struct Set {
    dim: usize,
    parts: Vec<Part>,
    descr: SetDescr,
}

const TREE_THRESHOLD: usize = 64;

fn points_part(pts: Vec<Vec<f64>>) -> Part {
    let tree = (pts.len() > TREE_THRESHOLD).then(|| KdTree::new(&pts));
    Part::Points { pts, tree }
}

pub fn segment_dist(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ax = sub(x, a);
    let len2 = dot(&ab, &ab);
    let t = if len2 > 0.0 {
        (dot(&ax, &ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d2: f64 = ax
        .iter()
        .zip(&ab)
        .map(|(p, q)| (p - t * q) * (p - t * q))
        .sum();
    d2.sqrt()
}

fn polyline_dist(x: &[f64], v: &[Vec<f64>]) -> f64 {
    if v.len() == 1 {
        return norm(&sub(x, &v[0]));
    }
    v.windows(2)
        .map(|w| segment_dist(x, &w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

pub fn validate_frame(frame: &[Vec<f64>], k: usize) -> Result<()> {
    if frame.len() != k || frame.iter().any(|r| r.len() != k) {
        return Err(Error::Chart(format!("frame must be {k}x{k}")));
    }
    for i in 0..k {
        for j in 0..k {
            let want = if i == j { 1.0 } else { 0.0 };
            if (dot(&frame[i], &frame[j]) - want).abs() > 1e-12 {
                return Err(Error::Chart("frame is not orthogonal to 1e-12".into()));
            }
        }
    }
    Ok(())
}

/// Orthonormal frame whose first row is the unit vector `e`.
pub fn frame_from_direction(e: &[f64]) -> Vec<Vec<f64>> {
    let k = e.len();
    let mut rows = vec![e.to_vec()];
    for j in 0..k {
        let mut v = vec![0.0; k];
        v[j] = 1.0;
        for r in &rows {
            let d = dot(&v, r);
            for (vi, ri) in v.iter_mut().zip(r) {
                *vi -= d * ri;
            }
        }
        let n = norm(&v);
        if n > 1e-6 {
            rows.push(v.iter().map(|x| x / n).collect());
        }
        if rows.len() == k {
            break;
        }
    }
    // Re-orthonormalize once more to reach 1e-12.
    for i in 1..k {
        for j in 0..i {
            let d = dot(&rows[i], &rows[j]);
            let rj = rows[j].clone();
            for (a, b) in rows[i].iter_mut().zip(&rj) {
                *a -= d * b;
            }
        }
        let n = norm(&rows[i]);
        rows[i].iter_mut().for_each(|a| *a /= n);
    }
    rows
}

impl SetDescr {
    pub fn dim(&self) -> usize {
        match self {
            SetDescr::PointCloud { points } => points.first().map_or(0, |p| p.len()),
            SetDescr::Polyline { vertices } => vertices.first().map_or(0, |p| p.len()),
            SetDescr::LipGraph { dim, .. } => *dim,
            SetDescr::CantorDust { lo, .. } => lo.len(),
            SetDescr::UnionOf { members } => members.first().map_or(0, |m| m.dim()),
        }
    }

    pub fn build(&self) -> Result<Set> {
        let k = self.dim();
        if k == 0 {
            return Err(Error::Argument("empty set descriptor".into()));
        }
        let mut parts = Vec::new();
        self.collect(k, &mut parts)?;
        Ok(Set {
            dim: k,
            parts,
            descr: self.clone(),
        })
    }

    fn collect(&self, k: usize, parts: &mut Vec<Part>) -> Result<()> {
        let check = |p: &Vec<f64>| -> Result<()> {
            if p.len() != k || p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Argument(format!(
                    "point {p:?} is not a finite {k}-vector"
                )));
            }
            Ok(())
        };
        match self {
            SetDescr::PointCloud { points } => {
                if points.is_empty() {
                    return Err(Error::Argument("empty point cloud".into()));
                }
                points.iter().try_for_each(check)?;
                parts.push(points_part(points.clone()));
            }
            SetDescr::Polyline { vertices } => {
                if vertices.is_empty() {
                    return Err(Error::Argument("empty polyline".into()));
                }
                vertices.iter().try_for_each(check)?;
                parts.push(Part::Polyline {
                    verts: vertices.clone(),
                });
            }
            SetDescr::LipGraph {
                dim,
                lipschitz,
                t_min,
                t_max,
                samples,
                profile,
                frame,
                origin,
            } => {
                let k = *dim;
                if k < 2 {
                    return Err(Error::Argument("graphs need dimension >= 2".into()));
                }
                if !(t_min < t_max) || *samples < 2 {
                    return Err(Error::Argument(
                        "graph needs t_min < t_max and at least two samples".into(),
                    ));
                }
                let frame = match frame {
                    Some(f) => {
                        validate_frame(f, k)?;
                        f.clone()
                    }
                    None => (0..k)
                        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                        .collect(),
                };
                let origin = origin.clone().unwrap_or_else(|| vec![0.0; k]);
                check(&origin)?;
                let n = *samples;
                let params: Vec<f64> = (0..n)
                    .map(|i| t_min + (t_max - t_min) * i as f64 / (n - 1) as f64)
                    .collect();
                let normals: Vec<Vec<f64>> = match profile {
                    ChartProfile::Values { values } => {
                        if values.len() != n || values.iter().any(|v| v.len() != k - 1) {
                            return Err(Error::Argument(format!(
                                "graph values must be {n} rows of {} numbers",
                                k - 1
                            )));
                        }
                        values.clone()
                    }
                    p => params
                        .iter()
                        .map(|&s| {
                            let mut v = vec![0.0; k - 1];
                            v[0] = p.first(s);
                            v
                        })
                        .collect(),
                };
                let mut chart = Chart {
                    origin,
                    frame,
                    lipschitz: *lipschitz,
                    params,
                    normals,
                    world: Vec::new(),
                };
                chart.world = chart
                    .params
                    .iter()
                    .zip(&chart.normals)
                    .map(|(s, nv)| {
                        let mut c = vec![*s];
                        c.extend_from_slice(nv);
                        chart.to_world(&c)
                    })
                    .collect();
                parts.push(Part::Graph(chart));
            }
            SetDescr::CantorDust {
                corners,
                ratio,
                depth,
                lo,
                hi,
            } => {
                if !(*ratio > 0.0 && *ratio < 0.5) {
                    return Err(Error::Argument("cantor ratio must lie in (0, 1/2)".into()));
                }
                if *corners != 2 && *corners != 1 << k {
                    return Err(Error::Argument(format!(
                        "cantor corners must be 2 or {}",
                        1 << k
                    )));
                }
                if lo.len() != k || hi.len() != k {
                    return Err(Error::Argument("cantor box must match dimension".into()));
                }
                let count = (*corners as f64).powi(*depth as i32);
                if count > 4.0e6 {
                    return Err(Error::Argument(format!(
                        "cantor dust with {count} cells is too fine"
                    )));
                }
                parts.push(points_part(cantor_centers(*corners, *ratio, *depth, lo, hi)));
            }
            SetDescr::UnionOf { members } => {
                if members.is_empty() {
                    return Err(Error::Argument("empty union of sets".into()));
                }
                for m in members {
                    if m.dim() != k {
                        return Err(Error::Argument("union members differ in dimension".into()));
                    }
                    m.collect(k, parts)?;
                }
            }
        }
        Ok(())
    }
}

/// Centers of the depth-`depth` cells of a Cantor dust.
pub fn cantor_centers(corners: usize, ratio: f64, depth: u32, lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let k = lo.len();
    // Offsets of cells in unit coordinates, each of width ratio^depth.
    let mut cells: Vec<Vec<f64>> = vec![vec![0.0; k]];
    let mut width = 1.0;
    for _ in 0..depth {
        let next_w = width * ratio;
        let mut next = Vec::with_capacity(cells.len() * corners);
        for c in &cells {
            for m in 0..corners {
                let mut o = c.clone();
                if corners == 2 {
                    o[0] += if m == 1 { width - next_w } else { 0.0 };
                } else {
                    for (axis, oi) in o.iter_mut().enumerate() {
                        if m >> axis & 1 == 1 {
                            *oi += width - next_w;
                        }
                    }
                }
                next.push(o);
            }
        }
        cells = next;
        width = next_w;
    }
    cells
        .into_iter()
        .map(|o| {
            (0..k)
                .map(|i| {
                    let u = if corners == 2 && i > 0 {
                        0.5
                    } else {
                        o[i] + 0.5 * width
                    };
                    lo[i] + u * (hi[i] - lo[i])
                })
                .collect()
        })
        .collect()
}

impl Set {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn descr(&self) -> &SetDescr {
        &self.descr
    }

    pub fn dist(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for p in &self.parts {
            let d = match p {
                Part::Points { pts, tree } => match tree {
                    Some(t) => t.nearest_sq(x).sqrt(),
                    None => pts
                        .iter()
                        .map(|q| norm(&sub(x, q)))
                        .fold(f64::INFINITY, f64::min),
                },
                Part::Polyline { verts } => polyline_dist(x, verts),
                Part::Graph(c) => polyline_dist(x, &c.world),
            };
            best = best.min(d);
        }
        best
    }

    /// Distance to the union of this set and another.
    pub fn dist_union(&self, other: &Set, x: &[f64]) -> f64 {
        self.dist(x).min(other.dist(x))
    }

    pub fn charts(&self) -> Vec<&Chart> {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Graph(c) => Some(c),
                _ => None,
            })
            .collect()
    }

    /// Vertex lists of the polylines (graph charts included, in world coordinates).
    pub fn polylines(&self) -> Vec<&[Vec<f64>]> {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Polyline { verts } => Some(verts.as_slice()),
                Part::Graph(c) => Some(c.world.as_slice()),
                _ => None,
            })
            .collect()
    }

    /// Points of the set with spacing at most `spacing` along curves.
    pub fn sample(&self, spacing: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for p in &self.parts {
            match p {
                Part::Points { pts, .. } => out.extend(pts.iter().cloned()),
                Part::Polyline { verts } => densify(verts, spacing, &mut out),
                Part::Graph(c) => densify(&c.world, spacing, &mut out),
            }
        }
        out
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let pts = self.sample(f64::INFINITY);
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in &pts {
            for i in 0..self.dim {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        (lo, hi)
    }

    pub fn diameter_bound(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        norm(&sub(&hi, &lo))
    }
}

fn densify(verts: &[Vec<f64>], spacing: f64, out: &mut Vec<Vec<f64>>) {
    out.push(verts[0].clone());
    for w in verts.windows(2) {
        let len = norm(&sub(&w[1], &w[0]));
        let n = if spacing.is_finite() {
            (len / spacing).ceil().max(1.0) as usize
        } else {
            1
        };
        for j in 1..=n {
            let t = j as f64 / n as f64;
            out.push(w[0].iter().zip(&w[1]).map(|(a, b)| a + t * (b - a)).collect());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_distances() {
        let s = SetDescr::PointCloud {
            points: vec![vec![3.0, 4.0]],
        }
        .build()
        .unwrap();
        assert_eq!(s.dist(&[0.0, 0.0]), 5.0);
        let seg = SetDescr::Polyline {
            vertices: vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
        }
        .build()
        .unwrap();
        assert_eq!(seg.dist(&[0.0, 1.0]), 1.0);
        let seg = SetDescr::Polyline {
            vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        }
        .build()
        .unwrap();
        assert!((seg.dist(&[2.0, 3.0]) - 10f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sawtooth_graph_points() {
        let g = SetDescr::LipGraph {
            dim: 2,
            lipschitz: 2.0,
            t_min: -1.0,
            t_max: 1.0,
            samples: 9,
            profile: ChartProfile::Sawtooth {
                slope: 2.0,
                period: 0.5,
            },
            frame: None,
            origin: None,
        }
        .build()
        .unwrap();
        let c = g.charts()[0];
        assert_eq!(c.world[0], vec![-1.0, 0.0]);
        assert_eq!(c.world[1], vec![-0.75, 0.5]);
        assert_eq!(g.dist(&[-0.75, 0.5]), 0.0);
    }

    #[test]
    fn cantor_cells() {
        let pts = cantor_centers(2, 1.0 / 3.0, 2, &[0.0, 0.0], &[1.0, 1.0]);
        let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        let want = [1.0 / 18.0, 5.0 / 18.0, 13.0 / 18.0, 17.0 / 18.0];
        for (a, b) in xs.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(pts.iter().all(|p| p[1] == 0.5));
    }

    #[test]
    fn frames_are_orthonormal() {
        let e = [1.0 / 3f64.sqrt(); 3];
        let f = frame_from_direction(&e);
        validate_frame(&f, 3).unwrap();
    }
}
