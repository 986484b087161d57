use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, sub};
use crate::monotone::{eta, DecreasingFn};
use crate::rng::{shard_rng, shard_sizes};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub weight: f64,
    pub pole: Vec<f64>,
}

/// Subharmonic test functions with known singular sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `sum_j w_j eta_k(|x - b_j|)`.
    KernelSum { k: u32, terms: Vec<KernelTerm> },
    /// `log |scale * prod (z - zeros) / prod (z - poles)|` in the plane.
    LogModulus {
        zeros: Vec<[f64; 2]>,
        poles: Vec<[f64; 2]>,
        scale: f64,
    },
    /// Values at grid nodes, in grid index order.
    GridField { values: Vec<f64> },
}

impl TestFunction {
    pub fn kernel_sum(k: u32, poles: &[Vec<f64>], weight: f64) -> Self {
        TestFunction::KernelSum {
            k,
            terms: poles
                .iter()
                .map(|p| KernelTerm {
                    weight,
                    pole: p.clone(),
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::KernelSum { k, terms } => {
                if terms.is_empty() {
                    return Err(Error::Argument("kernel sum without poles".into()));
                }
                for t in terms {
                    if t.pole.len() != *k as usize {
                        return Err(Error::Argument(format!("pole {:?} is not in R^{k}", t.pole)));
                    }
                    if !(t.weight > 0.0 && t.weight.is_finite()) {
                        return Err(Error::Argument(format!("kernel weight {} must be positive", t.weight)));
                    }
                }
            }
            TestFunction::LogModulus { scale, .. } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::Argument(format!("scale {scale} must be positive")));
                }
            }
            TestFunction::GridField { .. } => {}
        }
        Ok(())
    }

    /// Value at `x`; `GridField` has no pointwise evaluation and gives NaN.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::KernelSum { k, terms } => terms
                .iter()
                .map(|t| {
                    let r = norm(&sub(x, &t.pole));
                    if r == 0.0 {
                        f64::INFINITY
                    } else {
                        t.weight * eta(*k, r)
                    }
                })
                .sum(),
            TestFunction::LogModulus { zeros, poles, scale } => {
                let lz: f64 = zeros.iter().map(|z| (x[0] - z[0]).hypot(x[1] - z[1]).ln()).sum();
                let lp: f64 = poles.iter().map(|p| (x[0] - p[0]).hypot(x[1] - p[1]).ln()).sum();
                scale.ln() + lz - lp
            }
            TestFunction::GridField { .. } => f64::NAN,
        }
    }

    /// Value at grid node `i` located at `x`.
    pub fn eval_node(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            TestFunction::GridField { values } => values[i],
            _ => self.eval(x),
        }
    }

    /// Points where the discrete operator cannot see the function: poles,
    /// and zeros of a log-modulus.
    pub fn singular_points(&self) -> Vec<Vec<f64>> {
        match self {
            TestFunction::KernelSum { terms, .. } => terms.iter().map(|t| t.pole.clone()).collect(),
            TestFunction::LogModulus { zeros, poles, .. } => zeros
                .iter()
                .chain(poles)
                .map(|p| p.to_vec())
                .collect(),
            TestFunction::GridField { .. } => Vec::new(),
        }
    }

    /// Multiplies the function by `factor`; a log-modulus is shifted by
    /// `ln factor` instead (scale multiplied).
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            TestFunction::KernelSum { k, terms } => TestFunction::KernelSum {
                k: *k,
                terms: terms
                    .iter()
                    .map(|t| KernelTerm {
                        weight: t.weight * factor,
                        pole: t.pole.clone(),
                    })
                    .collect(),
            },
            TestFunction::LogModulus { zeros, poles, scale } => TestFunction::LogModulus {
                zeros: zeros.clone(),
                poles: poles.clone(),
                scale: scale * factor,
            },
            TestFunction::GridField { values } => TestFunction::GridField {
                values: values.iter().map(|v| v * factor).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub function: TestFunction,
    /// Common weight of the kernel terms.
    pub weight: f64,
    /// Smallest observed `g(dist(x, B)) / sum eta` (before the safety factor).
    pub min_ratio: f64,
    pub witness: Vec<f64>,
    /// `min g(dist(x, B)) - u(x)` over all samples for the returned weight.
    pub margin: f64,
    pub samples: usize,
    pub seed: u64,
}

const SAFETY: f64 = 1.0 - 1e-9;
const REFINE: usize = 16;

fn unit_vector<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn min_dist(poles: &[Vec<f64>], x: &[f64]) -> f64 {
    poles.iter().map(|p| norm(&sub(x, p))).fold(f64::INFINITY, f64::min)
}

fn kernel(k: u32, poles: &[Vec<f64>], x: &[f64]) -> f64 {
    poles.iter().map(|p| eta(k, norm(&sub(x, p)))).sum()
}

/// Largest common weight `c` with `c sum eta(|x - b_j|) <= g(dist(x, B))` on
/// a dense sample of `{0 < dist(x, B) < alpha}`: radial log-spaced probes
/// around every pole, uniform probes of the zone, the `extra` points, then a
/// compass refinement of the worst samples.
pub fn calibrate_kernel(
    poles: &[Vec<f64>],
    g: &DecreasingFn,
    alpha: f64,
    k: u32,
    budget: usize,
    extra: &[Vec<f64>],
    seed: u64,
) -> Result<Calibration> {
    if poles.is_empty() {
        return Err(Error::CalibrationFailed("no poles".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::Argument(format!("alpha must be positive, got {alpha}")));
    }
    let dim = k as usize;
    let ratio = |x: &[f64]| -> Option<f64> {
        let d = min_dist(poles, x);
        if !(d > 0.0 && d < alpha) {
            return None;
        }
        let s = kernel(k, poles, x);
        (s > 0.0).then(|| g.value(d) / s)
    };
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in poles {
        for i in 0..dim {
            lo[i] = lo[i].min(p[i] - alpha);
            hi[i] = hi[i].max(p[i] + alpha);
        }
    }
    let sizes = shard_sizes(budget);
    let mut pts: Vec<Vec<f64>> = sizes
        .par_iter()
        .enumerate()
        .flat_map_iter(|(s, &n)| {
            let mut rng = shard_rng(seed, s as u64);
            let mut out = Vec::with_capacity(n);
            for j in 0..n {
                if j % 2 == 0 {
                    let p = &poles[rng.random_range(0..poles.len())];
                    let e = unit_vector(&mut rng, dim);
                    let r = alpha * 10f64.powf(-6.0 * rng.random::<f64>());
                    out.push(p.iter().zip(&e).map(|(a, b)| a + r * b).collect());
                } else {
                    out.push((0..dim).map(|i| rng.random_range(lo[i]..hi[i])).collect());
                }
            }
            out
        })
        .collect();
    pts.extend(extra.iter().cloned());
    let mut scored: Vec<(f64, usize)> = pts
        .par_iter()
        .enumerate()
        .filter_map(|(i, x)| ratio(x).map(|r| (r, i)))
        .collect();
    if scored.is_empty() {
        return Err(Error::CalibrationFailed(
            "the kernel is not positive anywhere in the zone".into(),
        ));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let refined: Vec<(f64, Vec<f64>)> = scored
        .iter()
        .take(REFINE)
        .map(|&(r, i)| compass(&pts[i], r, &ratio, min_dist(poles, &pts[i])))
        .collect();
    let (min_ratio, witness) = refined
        .into_iter()
        .fold((f64::INFINITY, Vec::new()), |acc, c| if c.0 < acc.0 { c } else { acc });
    if !(min_ratio >= 1e-6) {
        return Err(Error::CalibrationFailed(format!(
            "weight {min_ratio:e} below 1e-6 at {witness:?}"
        )));
    }
    let weight = min_ratio * SAFETY;
    let margin = pts
        .par_iter()
        .filter_map(|x| {
            let d = min_dist(poles, x);
            (d > 0.0 && d < alpha).then(|| g.value(d) - weight * kernel(k, poles, x))
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(Calibration {
        function: TestFunction::kernel_sum(k, poles, weight),
        weight,
        min_ratio,
        witness,
        margin,
        samples: pts.len(),
        seed,
    })
}

/// Coordinate pattern search for a smaller ratio, staying inside the zone.
fn compass<F>(x0: &[f64], r0: f64, ratio: &F, d0: f64) -> (f64, Vec<f64>)
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let mut x = x0.to_vec();
    let mut best = r0;
    let mut step = 0.1 * d0;
    for _ in 0..200 {
        if step < 1e-12 * d0.max(1e-300) {
            break;
        }
        let mut moved = false;
        for i in 0..x.len() {
            for sgn in [-1.0, 1.0] {
                let mut y = x.clone();
                y[i] += sgn * step;
                if let Some(r) = ratio(&y) {
                    if r < best {
                        best = r;
                        x = y;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (best, x)
}
