//! Majorant fields over a region, their distribution functions and the
//! layer-cake identity.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{log_space, norm, sub, Region, Set};
use crate::monotone::{DecreasingFn, Interval, Table};
use crate::rng::{shard_rng, shard_sizes};

type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Non-negative field on a region, possibly `+inf` on a null set.
#[derive(Clone)]
pub enum Majorant {
    /// `g(dist(x, S))`, infinite on `S`.
    Composed { g: DecreasingFn, set: Arc<Set> },
    Constant(f64),
    /// `value` on the open box, 0 elsewhere.
    Indicator {
        lo: Vec<f64>,
        hi: Vec<f64>,
        value: f64,
    },
    /// `profile(|x[..q] - center|)`: depends on the first `q` coordinates only.
    Product {
        q: usize,
        center: Vec<f64>,
        profile: DecreasingFn,
    },
    Field { name: String, f: FieldFn },
}

impl fmt::Debug for Majorant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Majorant::Composed { g, .. } => write!(f, "Composed({g:?})"),
            Majorant::Constant(c) => write!(f, "Constant({c})"),
            Majorant::Indicator { value, .. } => write!(f, "Indicator({value})"),
            Majorant::Product { q, profile, .. } => write!(f, "Product(q = {q}, {profile:?})"),
            Majorant::Field { name, .. } => write!(f, "Field({name})"),
        }
    }
}

impl Majorant {
    pub fn composed(g: DecreasingFn, set: Arc<Set>) -> Self {
        Majorant::Composed { g, set }
    }

    pub fn field<F>(name: &str, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Majorant::Field {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Majorant::Composed { g, set } => {
                let d = set.dist(x);
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    g.value(d)
                }
            }
            Majorant::Constant(c) => *c,
            Majorant::Indicator { lo, hi, value } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(xi, (l, h))| xi > l && xi < h);
                if inside {
                    *value
                } else {
                    0.0
                }
            }
            Majorant::Product { q, center, profile } => {
                let r = norm(&sub(&x[..*q], &center[..*q]));
                profile.value(r)
            }
            Majorant::Field { f, .. } => f(x),
        }
    }
}

/// Values of `F` at `n` uniform points of the region, in a fixed order.
pub fn sample_values(f: &Majorant, omega: &Region, n: usize, seed: u64) -> Vec<f64> {
    shard_sizes(n)
        .into_par_iter()
        .enumerate()
        .map(|(shard, count)| {
            let mut rng = shard_rng(seed, shard as u64);
            (0..count)
                .map(|_| f.eval(&omega.sample(&mut rng)))
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

/// Tabulated `s -> m({F > s})` with per-node standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct DistFn {
    pub s: Vec<f64>,
    pub f: Vec<f64>,
    pub std_err: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    pub volume: f64,
}

/// Pool-adjacent-violators projection onto non-increasing sequences.
pub fn isotonic_decreasing(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, n)| std::iter::repeat_n(v, n))
        .collect()
}

/// Monte Carlo distribution function of `F` over `omega` on the given
/// strictly increasing grid, or on 64 log-spaced nodes from the smallest
/// positive sample to the cap (largest finite sample when no cap is given).
pub fn distribution_function(
    f: &Majorant,
    omega: &Region,
    n: usize,
    s_grid: Option<&[f64]>,
    cap: Option<f64>,
    seed: u64,
) -> Result<DistFn> {
    if n < 10_000 {
        return Err(Error::Argument(format!(
            "distribution function needs at least 1e4 samples, got {n}"
        )));
    }
    let mut values = sample_values(f, omega, n, seed);
    values.sort_by(|a, b| a.total_cmp(b));
    let grid: Vec<f64> = match s_grid {
        Some(g) => {
            if g.windows(2).any(|w| !(w[0] < w[1])) || g.is_empty() {
                return Err(Error::Argument("s-grid must be strictly increasing".into()));
            }
            g.to_vec()
        }
        None => {
            let lo = values.iter().cloned().find(|v| *v > 0.0).unwrap_or(1.0);
            let hi = cap.unwrap_or_else(|| {
                values
                    .iter()
                    .rev()
                    .cloned()
                    .find(|v| v.is_finite())
                    .unwrap_or(lo)
            });
            if hi > lo {
                log_space(lo, hi, 64)
            } else {
                vec![lo]
            }
        }
    };
    let volume = omega.volume();
    let nf = n as f64;
    let raw: Vec<f64> = grid
        .iter()
        .map(|&s| {
            let above = values.len() - values.partition_point(|v| *v <= s);
            volume * above as f64 / nf
        })
        .collect();
    let fitted = isotonic_decreasing(&raw);
    let std_err = fitted
        .iter()
        .map(|&v| {
            let p = v / volume;
            volume * (p * (1.0 - p) / nf).sqrt()
        })
        .collect();
    Ok(DistFn {
        s: grid,
        f: fitted,
        std_err,
        n,
        seed,
        volume,
    })
}

impl DistFn {
    /// Piecewise-linear interpolation; `volume` left of the grid is not
    /// assumed, the first node value is used instead.
    pub fn value(&self, s: f64) -> f64 {
        let i = self.s.partition_point(|&x| x <= s);
        if i == 0 {
            return self.f[0];
        }
        if i == self.s.len() {
            return self.f[i - 1];
        }
        let w = (s - self.s[i - 1]) / (self.s[i] - self.s[i - 1]);
        self.f[i - 1] + w * (self.f[i] - self.f[i - 1])
    }

    pub fn as_decreasing(&self) -> Result<DecreasingFn> {
        let mut knots: Vec<[f64; 2]> = Vec::with_capacity(self.s.len());
        for (&s, &v) in self.s.iter().zip(&self.f) {
            if let Some(last) = knots.last() {
                if last[1] == v && knots.len() >= 2 && knots[knots.len() - 2][1] == v {
                    knots.pop();
                }
            }
            knots.push([s, v]);
        }
        if knots.len() == 1 {
            let [s, v] = knots[0];
            knots.push([s * 2.0 + 1.0, v]);
        }
        DecreasingFn::tabulated_nonnegative(Table::new(knots)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["s", "f", "std_err"])?;
        for i in 0..self.s.len() {
            w.write_record([
                format!("{:.12e}", self.s[i]),
                format!("{:.12e}", self.f[i]),
                format!("{:.6e}", self.std_err[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact distribution function of the empirical measure of the samples
/// (each carrying mass `volume / n`), as a right-continuous step table.
pub fn empirical_distribution(values: &[f64], volume: f64) -> Result<DecreasingFn> {
    let mut v: Vec<f64> = values.iter().cloned().filter(|x| x.is_finite()).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = values.len() as f64;
    let mass = volume / n;
    let start = v.first().map_or(0.0, |&x| x.min(0.0));
    let mut knots = vec![[start, mass * v.len() as f64]];
    let mut i = 0;
    while i < v.len() {
        let u = v[i];
        let mut j = i;
        while j < v.len() && v[j] == u {
            j += 1;
        }
        let before = mass * (v.len() - i) as f64;
        let after = mass * (v.len() - j) as f64;
        let last = knots[knots.len() - 1];
        if last[0] != u {
            knots.push([u, before]);
        }
        knots.push([u, after]);
        i = j;
    }
    if knots.len() == 1 {
        knots.push([start + 1.0, knots[0][1]]);
    }
    let mut table = Table::new(knots)?;
    table.right_continuous = true;
    DecreasingFn::tabulated_nonnegative(table)
}

/// `t -> f(a^t)` for `t > 0`, with inverse `s -> log_a f^-(s)`.
pub fn f1_transform(f: &DecreasingFn, a: f64) -> Result<DecreasingFn> {
    if !(a > 1.0) {
        return Err(Error::Argument(format!("base a must exceed 1, got {a}")));
    }
    let g = f.clone();
    let gi = f.clone();
    let ln_a = a.ln();
    Ok(DecreasingFn::computed("f1", Interval::open(0.0, f64::INFINITY), move |t| {
        g.value((t * ln_a).exp())
    })?
    .with_inverse(move |s| (gi.inverse_value(s).ln() / ln_a).max(0.0)))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LayerCake {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Combined standard error of the two sides.
    pub std_err: f64,
    pub n: usize,
    pub seed: u64,
}

/// Compares `int_{H > t} H` with `int_t^inf h(s) ds + t h(t)`, where `h` is
/// the distribution function of the same samples.
pub fn layer_cake_check(h: &Majorant, omega: &Region, t: f64, n: usize, seed: u64) -> Result<LayerCake> {
    if !(t > 0.0) {
        return Err(Error::Argument(format!("layer level must be positive, got {t}")));
    }
    let values = sample_values(h, omega, n, seed);
    let volume = omega.volume();
    let nf = n as f64;
    let above: Vec<f64> = values.iter().map(|&v| if v > t { v } else { 0.0 }).collect();
    let mean = above.iter().sum::<f64>() / nf;
    let var = above.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let lhs = volume * mean;
    let se_lhs = volume * (var / nf).sqrt();

    let dist = empirical_distribution(&values, volume)?;
    let table = dist.as_table().expect("empirical distribution is a table");
    let tail = if t >= table.t_max() { 0.0 } else { table.integral_from(t) };
    let rhs = tail + t * dist.value(t);
    let excess: Vec<f64> = values.iter().map(|&v| (v - t).max(0.0)).collect();
    let em = excess.iter().sum::<f64>() / nf;
    let ev = excess.iter().map(|v| (v - em) * (v - em)).sum::<f64>() / (nf - 1.0);
    let p = dist.value(t) / volume;
    let se_rhs = volume * (ev / nf).sqrt() + t * volume * (p * (1.0 - p) / nf).sqrt();
    Ok(LayerCake {
        t,
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        std_err: (se_lhs * se_lhs + se_rhs * se_rhs).sqrt(),
        n,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic_decreasing(&[3.0, 1.0, 2.0, 0.0]), vec![3.0, 1.5, 1.5, 0.0]);
        assert_eq!(isotonic_decreasing(&[1.0, 2.0]), vec![1.5, 1.5]);
    }

    #[test]
    fn empirical_step_counts_strictly_greater() {
        let d = empirical_distribution(&[1.0, 2.0, 2.0, 3.0], 4.0).unwrap();
        assert_eq!(d.value(0.5), 4.0);
        assert_eq!(d.value(1.0), 3.0);
        assert_eq!(d.value(2.0), 1.0);
        assert_eq!(d.value(2.5), 1.0);
        assert_eq!(d.value(3.0), 0.0);
    }

    #[test]
    fn constant_field_is_a_step() {
        let omega = Region::AxisBox {
            lo: vec![0.0, 0.0],
            hi: vec![2.0, 1.0],
        };
        let d = distribution_function(&Majorant::Constant(3.0), &omega, 10_000, Some(&[1.0, 2.9, 3.0, 4.0]), None, 1)
            .unwrap();
        assert_eq!(d.f, vec![2.0, 2.0, 0.0, 0.0]);
    }
}
