use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monotone::unit_ball_volume;

use super::{norm, sub};

/// Bounded open domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    AxisBox { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    UnionOf { members: Vec<Region> },
}

impl Region {
    pub fn unit_disk() -> Self {
        Region::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::AxisBox { lo, .. } => lo.len(),
            Region::Ball { center, .. } => center.len(),
            Region::UnionOf { members } => members.first().map_or(0, |m| m.dim()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::AxisBox { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::Argument("box corners must share a dimension".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
                    return Err(Error::Argument("box needs finite lo < hi componentwise".into()));
                }
            }
            Region::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Argument("ball needs a center and a positive radius".into()));
                }
            }
            Region::UnionOf { members } => {
                if members.is_empty() {
                    return Err(Error::Argument("empty union of regions".into()));
                }
                let k = members[0].dim();
                for m in members {
                    m.validate()?;
                    if m.dim() != k {
                        return Err(Error::Argument("union members differ in dimension".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::AxisBox { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(xi, (l, h))| xi > l && xi < h),
            Region::Ball { center, radius } => norm(&sub(x, center)) < *radius,
            Region::UnionOf { members } => members.iter().any(|m| m.contains(x)),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::AxisBox { lo, hi } => (lo.clone(), hi.clone()),
            Region::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Region::UnionOf { members } => {
                let (mut lo, mut hi) = members[0].bounding_box();
                for m in &members[1..] {
                    let (l, h) = m.bounding_box();
                    for i in 0..lo.len() {
                        lo[i] = lo[i].min(l[i]);
                        hi[i] = hi[i].max(h[i]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Diameter of the bounding box.
    pub fn scale(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        norm(&sub(&hi, &lo))
    }

    /// Lebesgue measure. Unions are estimated by sampling the bounding box
    /// with a fixed stream.
    pub fn volume(&self) -> f64 {
        match self {
            Region::AxisBox { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
            Region::Ball { center, radius } => {
                unit_ball_volume(center.len() as u32) * radius.powi(center.len() as i32)
            }
            Region::UnionOf { .. } => {
                let (lo, hi) = self.bounding_box();
                let boxvol: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).product();
                let mut rng = crate::rng::shard_rng(0x5eed, 0);
                let n = 400_000;
                let mut hits = 0usize;
                let mut x = vec![0.0; lo.len()];
                for _ in 0..n {
                    for i in 0..x.len() {
                        x[i] = rng.random_range(lo[i]..hi[i]);
                    }
                    if self.contains(&x) {
                        hits += 1;
                    }
                }
                boxvol * hits as f64 / n as f64
            }
        }
    }

    /// Uniform sample from the region.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Region::AxisBox { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| rng.random_range(*l..*h))
                .collect(),
            Region::Ball { center, radius } => {
                let mut p = sample_in_ball(rng, center.len(), *radius);
                for (pi, c) in p.iter_mut().zip(center) {
                    *pi += c;
                }
                p
            }
            Region::UnionOf { .. } => {
                let (lo, hi) = self.bounding_box();
                loop {
                    let x: Vec<f64> = lo
                        .iter()
                        .zip(&hi)
                        .map(|(l, h)| rng.random_range(*l..*h))
                        .collect();
                    if self.contains(&x) {
                        return x;
                    }
                }
            }
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn boundary_dist(&self, x: &[f64]) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::OutsideRegion { point: x.to_vec() });
        }
        Ok(match self {
            Region::AxisBox { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(xi, (l, h))| (xi - l).min(h - xi))
                .fold(f64::INFINITY, f64::min),
            Region::Ball { center, radius } => radius - norm(&sub(x, center)),
            Region::UnionOf { members } => union_boundary_dist(members, x),
        })
    }

    /// Parameter `t > 0` where the ray `x + t d` (unit `d`) leaves this
    /// convex member, for `x` inside it.
    fn ray_exit(&self, x: &[f64], d: &[f64]) -> f64 {
        match self {
            Region::AxisBox { lo, hi } => {
                let mut t = f64::INFINITY;
                for i in 0..x.len() {
                    if d[i] > 0.0 {
                        t = t.min((hi[i] - x[i]) / d[i]);
                    } else if d[i] < 0.0 {
                        t = t.min((lo[i] - x[i]) / d[i]);
                    }
                }
                t
            }
            Region::Ball { center, radius } => {
                let w = sub(x, center);
                let b: f64 = w.iter().zip(d).map(|(a, b)| a * b).sum();
                let c = w.iter().map(|a| a * a).sum::<f64>() - radius * radius;
                -b + (b * b - c).max(0.0).sqrt()
            }
            Region::UnionOf { members } => first_exit(members, x, d),
        }
    }
}

/// Uniform point in the centered ball of radius `r`.
pub fn sample_in_ball<R: Rng>(rng: &mut R, k: usize, r: f64) -> Vec<f64> {
    let mut p: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&p);
    let u: f64 = rng.random();
    let scale = r * u.powf(1.0 / k as f64) / n;
    for v in &mut p {
        *v *= scale;
    }
    p
}

fn first_exit(members: &[Region], x: &[f64], d: &[f64]) -> f64 {
    let mut cur = 0.0;
    for _ in 0..4 * members.len() + 4 {
        let p: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + cur * b).collect();
        let mut next = cur;
        for m in members {
            if m.contains(&p) {
                next = f64::max(next, m.ray_exit(x, d));
            }
        }
        if next <= cur {
            return cur;
        }
        cur = next;
    }
    cur
}

fn direction(k: usize, params: &[f64]) -> Vec<f64> {
    if k == 2 {
        vec![params[0].cos(), params[0].sin()]
    } else {
        let (th, ph) = (params[0], params[1]);
        let mut v = vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
        v.resize(k, 0.0);
        v
    }
}

/// Distance to the boundary of a union of convex members: the minimum over
/// directions of the first exit from the union, found on a dense direction
/// set and then refined by coordinate golden-section search.
fn union_boundary_dist(members: &[Region], x: &[f64]) -> f64 {
    let k = x.len();
    let exit = |p: &[f64]| first_exit(members, x, &direction(k, p));
    let mut best = (f64::INFINITY, vec![0.0; 2]);
    let (n0, n1) = if k == 2 { (4096, 1) } else { (128, 256) };
    for i in 0..n0 {
        for j in 0..n1 {
            let p = if k == 2 {
                vec![2.0 * std::f64::consts::PI * i as f64 / n0 as f64, 0.0]
            } else {
                vec![
                    std::f64::consts::PI * (i as f64 + 0.5) / n0 as f64,
                    2.0 * std::f64::consts::PI * j as f64 / n1 as f64,
                ]
            };
            let e = exit(&p);
            if e < best.0 {
                best = (e, p);
            }
        }
    }
    let dims = if k == 2 { 1 } else { 2 };
    let mut width = if k == 2 {
        2.0 * std::f64::consts::PI / n0 as f64
    } else {
        2.0 * std::f64::consts::PI / n1 as f64
    };
    for _ in 0..4 {
        for c in 0..dims {
            let base = best.1.clone();
            let f = |s: f64| {
                let mut p = base.clone();
                p[c] = s;
                exit(&p)
            };
            let (s, v) = golden_min(f, base[c] - width, base[c] + width, 60);
            if v < best.0 {
                best.0 = v;
                best.1[c] = s;
            }
        }
        width *= 0.25;
    }
    best.0
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_boundary_distances() {
        assert_eq!(Region::unit_disk().boundary_dist(&[0.0, 0.0]).unwrap(), 1.0);
        let b = Region::AxisBox {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        assert!((b.boundary_dist(&[0.2, 0.5]).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(
            b.boundary_dist(&[1.5, 0.5]),
            Err(Error::OutsideRegion { .. })
        ));
    }

    #[test]
    fn union_of_disjoint_looking_boxes() {
        let u = Region::UnionOf {
            members: vec![
                Region::AxisBox {
                    lo: vec![0.0, 0.0],
                    hi: vec![2.0, 1.0],
                },
                Region::AxisBox {
                    lo: vec![1.0, 0.0],
                    hi: vec![3.0, 1.0],
                },
            ],
        };
        // Interior seam at x = 1 and x = 2 is not boundary.
        let d = u.boundary_dist(&[1.9, 0.5]).unwrap();
        assert!((d - 0.5).abs() < 1e-9, "{d}");
        let d = u.boundary_dist(&[2.8, 0.5]).unwrap();
        assert!((d - 0.2).abs() < 1e-9, "{d}");
    }

    #[test]
    fn ball_volume() {
        let b = Region::Ball {
            center: vec![0.0; 3],
            radius: 2.0,
        };
        assert!((b.volume() - 32.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
    }
}
