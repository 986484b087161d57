//! Largest discrete subharmonic minorant of an obstacle on a lattice.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Region;

/// Constant in the discretization allowance `C_DISC * sqrt(h) * cap`.
pub const C_DISC: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeClass {
    /// Inside the region; updated by the sweeps.
    Interior,
    /// Outside the region; holds the obstacle value.
    Ghost,
    /// Inside the region but held at the obstacle (cells meeting `B`).
    Pinned,
}

/// Uniform lattice covering the bounding box of a region.
#[derive(Debug, Clone)]
pub struct Grid {
    pub k: usize,
    pub lo: Vec<f64>,
    pub h: f64,
    pub dims: Vec<usize>,
    strides: Vec<usize>,
    class: Vec<NodeClass>,
    colors: [Vec<usize>; 2],
}

impl Grid {
    /// `n` nodes along the longest side of the bounding box.
    pub fn new(region: &Region, n: usize) -> Result<Self> {
        region.validate()?;
        let k = region.dim();
        if !(k == 2 || k == 3) {
            return Err(Error::Argument(format!("grids need k in {{2, 3}}, got {k}")));
        }
        if n < 3 {
            return Err(Error::Argument("a grid needs at least 3 nodes per axis".into()));
        }
        let (lo, hi) = region.bounding_box();
        let longest = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max);
        let h = longest / (n - 1) as f64;
        let dims: Vec<usize> = lo
            .iter()
            .zip(&hi)
            .map(|(l, u)| ((u - l) / h - 1e-9).ceil() as usize + 1)
            .collect();
        let mut strides = vec![1; k];
        for i in 1..k {
            strides[i] = strides[i - 1] * dims[i - 1];
        }
        let total = strides[k - 1] * dims[k - 1];
        let mut grid = Grid {
            k,
            lo,
            h,
            dims,
            strides,
            class: vec![NodeClass::Ghost; total],
            colors: [Vec::new(), Vec::new()],
        };
        grid.class = (0..total)
            .into_par_iter()
            .map(|i| {
                if region.contains(&grid.point(i)) {
                    NodeClass::Interior
                } else {
                    NodeClass::Ghost
                }
            })
            .collect();
        grid.rebuild_colors();
        Ok(grid)
    }

    fn rebuild_colors(&mut self) {
        let mut colors = [Vec::new(), Vec::new()];
        for (i, c) in self.class.iter().enumerate() {
            if *c == NodeClass::Interior {
                let parity = self.coords(i).iter().sum::<usize>() % 2;
                colors[parity].push(i);
            }
        }
        self.colors = colors;
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    pub fn coords(&self, idx: usize) -> Vec<usize> {
        (0..self.k).map(|i| (idx / self.strides[i]) % self.dims[i]).collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.coords(idx)
            .iter()
            .zip(&self.lo)
            .map(|(&c, l)| l + c as f64 * self.h)
            .collect()
    }

    pub fn class(&self, idx: usize) -> NodeClass {
        self.class[idx]
    }

    /// Stencil neighbours of a node that is not on the lattice edge.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.strides
            .iter()
            .flat_map(move |&s| [idx - s, idx + s])
    }

    /// Whether the full stencil of `idx` lies on the lattice.
    pub fn has_stencil(&self, idx: usize) -> bool {
        self.coords(idx)
            .iter()
            .zip(&self.dims)
            .all(|(&c, &d)| c >= 1 && c + 1 < d)
    }

    /// Interior nodes updated by the sweeps.
    pub fn free_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.colors[0].iter().chain(&self.colors[1]).copied()
    }

    pub fn free_count(&self) -> usize {
        self.colors[0].len() + self.colors[1].len()
    }

    /// Marks interior nodes satisfying `pred` as pinned.
    pub fn pin<P: Fn(&[f64]) -> bool + Sync>(&mut self, pred: P) {
        let flags: Vec<bool> = (0..self.len())
            .into_par_iter()
            .map(|i| self.class[i] == NodeClass::Interior && pred(&self.point(i)))
            .collect();
        for (i, f) in flags.into_iter().enumerate() {
            if f {
                self.class[i] = NodeClass::Pinned;
            }
        }
        self.rebuild_colors();
    }
}

/// Obstacle values on every lattice node, capped.
#[derive(Debug, Clone)]
pub struct Obstacle {
    pub values: Vec<f64>,
    pub cap: f64,
}

impl Obstacle {
    pub fn from_fn<F: Fn(&[f64]) -> f64 + Sync>(grid: &Grid, f: F, cap: f64) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let v = f(&grid.point(i));
                if v.is_nan() {
                    cap
                } else {
                    v.min(cap)
                }
            })
            .collect();
        Obstacle { values, cap }
    }

    /// Reads the `f` column of a field CSV written by [`write_field_csv`].
    pub fn read_csv(path: &Path, grid: &Grid) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let body: String = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n");
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Argument(format!("field CSV lacks a '{name}' column")))
        };
        let fcol = col("f")?;
        let idx_cols: Vec<usize> = ["i", "j", "l"][..grid.k]
            .iter()
            .map(|n| col(n))
            .collect::<Result<_>>()?;
        let mut values = vec![f64::NAN; grid.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let coords: Vec<usize> = idx_cols
                .iter()
                .map(|&c| rec[c].trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Argument(format!("bad index in field CSV: {e}")))?;
            if coords.iter().zip(&grid.dims).any(|(c, d)| c >= d) {
                return Err(Error::Argument(format!("index {coords:?} outside the grid")));
            }
            let v: f64 = rec[fcol]
                .trim()
                .parse()
                .map_err(|e| Error::Argument(format!("bad value in field CSV: {e}")))?;
            values[grid.index(&coords)] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Argument("field CSV does not cover every grid node".into()));
        }
        let cap = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Obstacle { values, cap })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    RedBlack,
    Jacobi,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PerronOptions {
    /// Stop once both the largest change in a full sweep and the
    /// estimated distance to the fixed point are at most this.
    pub tol: f64,
    pub max_iters: usize,
    pub schedule: Schedule,
}

impl PerronOptions {
    /// `tol = 1e-8 cap`, at most 10^6 sweeps, red-black order.
    pub fn for_cap(cap: f64) -> Self {
        PerronOptions {
            tol: 1e-8 * cap,
            max_iters: 1_000_000,
            schedule: Schedule::RedBlack,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PerronResult {
    #[serde(skip)]
    pub field: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub cap: f64,
    pub active_fraction: f64,
    pub converged: bool,
    /// `residual * rate / (1 - rate)` with the rate measured over the last
    /// ten sweeps.
    pub error_estimate: f64,
    /// Residual after every tenth sweep.
    pub residual_trace: Vec<f64>,
}

fn update(grid: &Grid, u: &[f64], f: &[f64], i: usize) -> f64 {
    let sum: f64 = grid.neighbors(i).map(|j| u[j]).sum();
    let avg = sum / (2 * grid.k) as f64;
    avg.min(f[i])
}

fn sweep_color(grid: &Grid, u: &mut [f64], f: &[f64], nodes: &[usize]) -> f64 {
    let new: Vec<f64> = nodes.par_iter().map(|&i| update(grid, u, f, i)).collect();
    let mut change = 0.0f64;
    for (&i, v) in nodes.iter().zip(new) {
        change = change.max((u[i] - v).abs());
        u[i] = v;
    }
    change
}

fn sweep_jacobi(grid: &Grid, u: &mut [f64], f: &[f64]) -> f64 {
    let nodes: Vec<usize> = grid.free_nodes().collect();
    sweep_color(grid, u, f, &nodes)
}

/// Fixed point of `u <- min(F, neighbour mean)` from `u0 = F`. The sweep
/// sequence decreases pointwise, so stopping early leaves the field above
/// the exact discrete minorant.
pub fn largest_subharmonic_minorant(
    obstacle: &Obstacle,
    grid: &Grid,
    opts: &PerronOptions,
) -> Result<PerronResult> {
    if obstacle.values.len() != grid.len() {
        return Err(Error::Argument("obstacle does not match the grid".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Argument("tolerance must be positive".into()));
    }
    let f = &obstacle.values;
    let mut u = f.clone();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut recent = std::collections::VecDeque::with_capacity(11);
    let mut estimate = f64::INFINITY;
    while iterations < opts.max_iters {
        residual = match opts.schedule {
            Schedule::RedBlack => {
                let r0 = sweep_color(grid, &mut u, f, &grid.colors[0]);
                let r1 = sweep_color(grid, &mut u, f, &grid.colors[1]);
                r0.max(r1)
            }
            Schedule::Jacobi => sweep_jacobi(grid, &mut u, f),
        };
        iterations += 1;
        if iterations % 10 == 0 {
            trace.push(residual);
        }
        if recent.len() == 11 {
            recent.pop_front();
        }
        recent.push_back(residual);
        estimate = if residual == 0.0 {
            0.0
        } else if recent.len() == 11 && recent[0] > 0.0 {
            let rate = (residual / recent[0]).powf(0.1);
            if rate < 1.0 {
                residual * rate / (1.0 - rate)
            } else {
                f64::INFINITY
            }
        } else {
            f64::INFINITY
        };
        if residual <= opts.tol && estimate <= opts.tol {
            break;
        }
    }
    let converged = residual <= opts.tol && estimate <= opts.tol;
    let free = grid.free_count().max(1);
    let active = grid
        .free_nodes()
        .filter(|&i| (u[i] - f[i]).abs() <= 1e-12 * obstacle.cap.abs().max(1.0))
        .count();
    let result = PerronResult {
        field: u,
        iterations,
        residual,
        cap: obstacle.cap,
        active_fraction: active as f64 / free as f64,
        converged,
        error_estimate: estimate,
        residual_trace: trace,
    };
    if !converged {
        log::warn!(
            "minorant iteration stopped after {iterations} sweeps with residual {residual:e}"
        );
    }
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct SubmeanViolation {
    pub point: Vec<f64>,
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubharmonicReport {
    pub checked: usize,
    pub max_excess: f64,
    pub violations: Vec<SubmeanViolation>,
}

impl SubharmonicReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Interior nodes (not excluded) with `u > neighbour mean + tol`.
pub fn discrete_subharmonic_check<S>(u: &[f64], grid: &Grid, tol: f64, skip: S) -> SubharmonicReport
where
    S: Fn(usize) -> bool + Sync,
{
    discrete_subharmonic_check_with(u, grid, |_, _| tol, skip)
}

/// As [`discrete_subharmonic_check`] with a node tolerance `tol(i, u_i)`.
pub fn discrete_subharmonic_check_with<T, S>(u: &[f64], grid: &Grid, tol: T, skip: S) -> SubharmonicReport
where
    T: Fn(usize, f64) -> f64 + Sync,
    S: Fn(usize) -> bool + Sync,
{
    let rows: Vec<(usize, f64, f64)> = (0..grid.len())
        .into_par_iter()
        .filter(|&i| grid.class(i) != NodeClass::Ghost && grid.has_stencil(i) && !skip(i))
        .filter_map(|i| {
            let vals: Vec<f64> = grid.neighbors(i).map(|j| u[j]).collect();
            if !u[i].is_finite() || vals.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let avg = vals.iter().sum::<f64>() / vals.len() as f64;
            Some((i, u[i] - avg, tol(i, u[i])))
        })
        .collect();
    let max_excess = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let violations = rows
        .iter()
        .filter(|r| r.1 > r.2)
        .map(|&(i, e, _)| SubmeanViolation {
            point: grid.point(i),
            excess: e,
        })
        .collect();
    SubharmonicReport {
        checked: rows.len(),
        max_excess,
        violations,
    }
}

/// `C_DISC * sqrt(h) * cap`.
pub fn discretization_allowance(h: f64, cap: f64) -> f64 {
    C_DISC * h.sqrt() * cap
}

pub const ALLOWANCE_FORMULA: &str = "C_disc * sqrt(h) * F_cap with C_disc = 1";

#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    pub checked: usize,
    pub min_margin: f64,
    pub witness: Option<Vec<f64>>,
    pub violations: usize,
    pub allowance: f64,
    pub allowance_formula: String,
}

impl MarginReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Margins `bound(x) - field(x)` over free and pinned nodes where `bound` is
/// finite; margins below `-allowance` are violations.
pub fn perron_vs_bound<B>(field: &[f64], grid: &Grid, bound: B, allowance: f64) -> MarginReport
where
    B: Fn(&[f64]) -> f64 + Sync,
{
    let margins: Vec<(usize, f64)> = (0..grid.len())
        .into_par_iter()
        .filter(|&i| grid.class(i) != NodeClass::Ghost)
        .filter_map(|i| {
            let b = bound(&grid.point(i));
            (b.is_finite()).then(|| (i, b - field[i]))
        })
        .collect();
    margin_summary(&margins, grid, allowance)
}

pub(crate) fn margin_summary(margins: &[(usize, f64)], grid: &Grid, allowance: f64) -> MarginReport {
    let mut min = f64::INFINITY;
    let mut witness = None;
    for &(i, m) in margins {
        if m < min {
            min = m;
            witness = Some(i);
        }
    }
    MarginReport {
        checked: margins.len(),
        min_margin: min,
        witness: witness.map(|i| grid.point(i)),
        violations: margins.iter().filter(|m| m.1 < -allowance).count(),
        allowance,
        allowance_formula: ALLOWANCE_FORMULA.to_string(),
    }
}

/// Flat CSV `(i, j[, l], x, y[, z], m, f, active)` over all nodes.
pub fn write_field_csv(path: &Path, grid: &Grid, field: &[f64], obstacle: &Obstacle, header: &str) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    if !header.is_empty() {
        writeln!(out, "{header}")?;
    }
    let idx = ["i", "j", "l"];
    let xs = ["x", "y", "z"];
    let mut cols: Vec<&str> = idx[..grid.k].to_vec();
    cols.extend_from_slice(&xs[..grid.k]);
    cols.extend_from_slice(&["m", "f", "active"]);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&cols)?;
    for i in 0..grid.len() {
        let mut row: Vec<String> = grid.coords(i).iter().map(|c| c.to_string()).collect();
        row.extend(grid.point(i).iter().map(|x| format!("{x:.12e}")));
        let active = (field[i] - obstacle.values[i]).abs() <= 1e-12 * obstacle.cap.abs().max(1.0);
        row.push(format!("{:.12e}", field[i]));
        row.push(format!("{:.12e}", obstacle.values[i]));
        row.push(if active { "1".into() } else { "0".into() });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> Grid {
        Grid::new(
            &Region::AxisBox {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            n,
        )
        .unwrap()
    }

    #[test]
    fn constant_obstacle_is_fixed() {
        let g = square(9);
        let obs = Obstacle::from_fn(&g, |_| 3.0, 3.0);
        let r = largest_subharmonic_minorant(&obs, &g, &PerronOptions::for_cap(3.0)).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.field.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn box_edges_are_ghosts() {
        let g = square(5);
        assert_eq!(g.free_count(), 9);
        assert_eq!(g.class(0), NodeClass::Ghost);
    }

    #[test]
    fn affine_and_convex_pass_concave_fails() {
        let g = square(17);
        let f = |s: f64| -> Vec<f64> {
            (0..g.len())
                .map(|i| {
                    let p = g.point(i);
                    s * (p[0] * p[0] + p[1] * p[1])
                })
                .collect()
        };
        let aff: Vec<f64> = (0..g.len()).map(|i| 2.0 * g.point(i)[0] - g.point(i)[1]).collect();
        assert!(discrete_subharmonic_check(&aff, &g, 1e-12, |_| false).passed());
        assert!(discrete_subharmonic_check(&f(1.0), &g, 0.0, |_| false).passed());
        let r = discrete_subharmonic_check(&f(-1.0), &g, 0.0, |_| false);
        assert_eq!(r.violations.len(), r.checked);
    }
}
