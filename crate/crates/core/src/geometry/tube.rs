use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monotone::unit_ball_volume;
use crate::rng::{derive_seed, shard_rng, shard_sizes};

use super::region::sample_in_ball;
use super::set::Set;

/// Monte Carlo estimate with its standard error and provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n: usize,
    pub seed: u64,
}

/// Lebesgue measure of `{y in B(x, r) : 0 < dist(y, G) <= sigma}` by uniform
/// sampling of the ball.
pub fn tube_measure(g: &Set, sigma: f64, x: &[f64], r: f64, n: usize, seed: u64) -> McEstimate {
    let k = x.len();
    let hits: usize = shard_sizes(n)
        .into_par_iter()
        .enumerate()
        .map(|(shard, count)| {
            let mut rng = shard_rng(seed, shard as u64);
            let mut hits = 0usize;
            let mut y = vec![0.0; k];
            for _ in 0..count {
                let p = sample_in_ball(&mut rng, k, r);
                for i in 0..k {
                    y[i] = x[i] + p[i];
                }
                let d = g.dist(&y);
                if d > 0.0 && d <= sigma {
                    hits += 1;
                }
            }
            hits
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let vol = unit_ball_volume(k as u32) * r.powi(k as i32);
    let p = hits as f64 / n as f64;
    McEstimate {
        value: vol * p,
        std_err: vol * (p * (1.0 - p) / n as f64).sqrt(),
        n,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSchedule {
    pub sigmas: Vec<f64>,
    pub radii: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    pub samples: usize,
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

impl ProbeSchedule {
    /// sigma in [1e-3, 1e-1] and R in [1e-2, 1], 5 log-spaced values each;
    /// centers on a 3-per-axis lattice over the bounding box of G, plus a few
    /// points of G itself.
    pub fn default_for(g: &Set, samples: usize) -> Self {
        let (lo, hi) = g.bounding_box();
        let k = g.dim();
        let mut centers = Vec::new();
        for idx in 0..3usize.pow(k as u32) {
            let mut c = Vec::with_capacity(k);
            let mut rem = idx;
            for i in 0..k {
                let j = rem % 3;
                rem /= 3;
                c.push(lo[i] + (hi[i] - lo[i]) * j as f64 / 2.0);
            }
            centers.push(c);
        }
        let pts = g.sample(f64::INFINITY);
        let stride = (pts.len() / 4).max(1);
        centers.extend(pts.iter().step_by(stride).take(4).cloned());
        centers.dedup();
        ProbeSchedule {
            sigmas: log_space(1e-3, 1e-1, 5),
            radii: log_space(1e-2, 1.0, 5),
            centers,
            samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstProbe {
    pub center: Vec<f64>,
    pub radius: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityEstimate {
    pub p_star: f64,
    pub q_star: f64,
    pub c_hat: f64,
    /// `max(c_hat, 1)`.
    pub c1: f64,
    /// Standard error of the maximizing ratio.
    pub std_err: f64,
    pub samples_per_probe: usize,
    pub probes: usize,
    pub worst: WorstProbe,
    pub seed: u64,
    pub schedule: ProbeSchedule,
}

impl AdmissibilityEstimate {
    /// An estimate with a known constant, for sets whose tube measure is
    /// available in closed form.
    pub fn exact(k: usize, p_star: f64, c: f64) -> Self {
        AdmissibilityEstimate {
            p_star,
            q_star: k as f64 - p_star,
            c_hat: c,
            c1: c.max(1.0),
            std_err: 0.0,
            samples_per_probe: 0,
            probes: 0,
            worst: WorstProbe {
                center: vec![0.0; k],
                radius: 0.0,
                sigma: 0.0,
            },
            seed: 0,
            schedule: ProbeSchedule {
                sigmas: vec![],
                radii: vec![],
                centers: vec![],
                samples: 0,
            },
        }
    }
}

/// Largest observed `m([G]_sigma cap B(x, R)) / (sigma^q* R^p*)` over the schedule.
pub fn admissibility_constant(
    g: &Set,
    p_star: f64,
    schedule: &ProbeSchedule,
    seed: u64,
) -> Result<AdmissibilityEstimate> {
    let k = g.dim() as f64;
    if !(p_star > 0.0 && p_star < k) {
        return Err(Error::Argument(format!(
            "p* must lie in (0, {k}), got {p_star}"
        )));
    }
    if schedule.sigmas.is_empty() || schedule.radii.is_empty() || schedule.centers.is_empty() {
        return Err(Error::Argument("empty admissibility schedule".into()));
    }
    let q_star = k - p_star;
    let mut best = (f64::NEG_INFINITY, 0.0, None);
    let mut probe = 0u64;
    for c in &schedule.centers {
        for &r in &schedule.radii {
            for &s in &schedule.sigmas {
                let est = tube_measure(g, s, c, r, schedule.samples, derive_seed(seed, probe));
                probe += 1;
                let scale = s.powf(q_star) * r.powf(p_star);
                let ratio = est.value / scale;
                if ratio > best.0 {
                    best = (
                        ratio,
                        est.std_err / scale,
                        Some(WorstProbe {
                            center: c.clone(),
                            radius: r,
                            sigma: s,
                        }),
                    );
                }
            }
        }
    }
    let (c_hat, std_err, worst) = best;
    Ok(AdmissibilityEstimate {
        p_star,
        q_star,
        c_hat,
        c1: c_hat.max(1.0),
        std_err,
        samples_per_probe: schedule.samples,
        probes: probe as usize,
        worst: worst.expect("schedule is non-empty"),
        seed,
        schedule: schedule.clone(),
    })
}
