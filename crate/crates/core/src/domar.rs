//! Domar-type majorants of the largest subharmonic minorant: constants,
//! the `phi = delta * psi` route and the `rho` route built from `mu`.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{log_space, norm, sample_in_ball, sub, Region};
use crate::measure::Majorant;
use crate::monotone::{unit_ball_volume, DecreasingFn, Interval};
use crate::quad::{integrate_left_singular, integrate_to_infinity, Tolerance};
use crate::rng::{derive_seed, shard_rng};

/// Exponents of `a` above this give the infinity sentinel.
pub fn overflow_exponent(a: f64) -> f64 {
    700.0 / a.ln()
}

/// `a^e`, infinite past the overflow threshold.
pub fn pow_a(a: f64, e: f64) -> f64 {
    if e > overflow_exponent(a) {
        f64::INFINITY
    } else {
        a.powf(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomarConstants {
    pub a: f64,
    pub exponent: f64,
    pub lambda: u32,
    pub d: f64,
    /// Volume of the unit ball of the ambient space.
    pub s1: f64,
}

impl DomarConstants {
    /// Left side of the feasibility inequality `a / (D^e S1) + a^-lambda <= 1`.
    pub fn feasibility(&self) -> f64 {
        feasibility(self.a, self.exponent, self.lambda, self.d, self.s1)
    }
}

fn feasibility(a: f64, exponent: f64, lambda: u32, d: f64, s1: f64) -> f64 {
    a / (d.powf(exponent) * s1) + a.powi(-(lambda as i32))
}

/// Smallest `D` with `a / (D^exponent S1) + a^-lambda <= 1`, `S1` the volume
/// of the unit ball in `R^k`.
pub fn choose_constants(a: f64, exponent: f64, lambda: u32, k: u32) -> Result<DomarConstants> {
    if !(a > 1.0) || !(exponent > 0.0) || lambda == 0 {
        return Err(Error::Argument(format!(
            "need a > 1, exponent > 0, lambda >= 1 (got {a}, {exponent}, {lambda})"
        )));
    }
    let s1 = unit_ball_volume(k);
    let slack = 1.0 - a.powi(-(lambda as i32));
    let mut d = (a / (s1 * slack)).powf(1.0 / exponent);
    // Rounding can leave the sum a hair above 1.
    while feasibility(a, exponent, lambda, d, s1) > 1.0 {
        d = d.next_up();
    }
    Ok(DomarConstants {
        a,
        exponent,
        lambda,
        d,
        s1,
    })
}

/// `delta(t) = (lambda + 1) ((k - 1)/eps)^((k-1)/k) (t - 1 - lambda)^(-eps/k)` on `(lambda + 1, inf)`.
pub fn delta_fn(k: u32, eps: f64, lambda: u32) -> Result<DecreasingFn> {
    if k < 2 || !(eps > 0.0) {
        return Err(Error::Argument(format!("need k >= 2 and eps > 0, got {k}, {eps}")));
    }
    let kf = k as f64;
    let l = lambda as f64;
    let pref = (l + 1.0) * ((kf - 1.0) / eps).powf((kf - 1.0) / kf);
    Ok(DecreasingFn::power_law(pref, eps / kf)?.shifted(l + 1.0))
}

fn psi_value(f1: &DecreasingFn, m: f64, k: f64, lambda: f64, t: f64, tol: Tolerance) -> Result<f64> {
    let x = t - lambda;
    if x <= 0.0 {
        return Ok(f64::INFINITY);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let tail = integrate_to_infinity(
        |u| {
            let v = f1.value(u);
            if v == 0.0 {
                0.0
            } else {
                v * m * u.powf(m - 1.0)
            }
        },
        x,
        tol,
    )?;
    let fx = f1.value(x);
    let boundary = if fx == 0.0 { 0.0 } else { x.powf(m) * fx };
    Ok((tail.value + boundary).max(0.0).powf(1.0 / k))
}

/// `psi(t) = [int_{t - lambda}^inf f1(u) m u^(m-1) du + (t - lambda)^m f1(t - lambda)]^(1/k)`
/// with `m = k - 1 + eps`, on `(lambda + 1, inf)`. The tail is probed at
/// `lambda + 2` before the function is returned.
pub fn psi_fn(f1: &DecreasingFn, k: u32, eps: f64, lambda: u32) -> Result<DecreasingFn> {
    let kf = k as f64;
    let m = kf - 1.0 + eps;
    let l = lambda as f64;
    let tol = Tolerance::relative(1e-9);
    psi_value(f1, m, kf, l, l + 2.0, tol)?;
    let f1 = f1.clone();
    DecreasingFn::computed("psi", Interval::open(l + 1.0, f64::INFINITY), move |t| {
        psi_value(&f1, m, kf, l, t.max(l + 1.0), tol).unwrap_or(f64::INFINITY)
    })
}

/// Theorem-A data: `phi = delta * psi` and its generalized inverse.
#[derive(Debug, Clone)]
pub struct TheoremA {
    pub eps: f64,
    pub k: u32,
    pub constants: DomarConstants,
    pub f1: DecreasingFn,
    pub delta: DecreasingFn,
    pub psi: DecreasingFn,
    pub phi: DecreasingFn,
    pub phi_inv: DecreasingFn,
}

impl TheoremA {
    pub fn new(f1: &DecreasingFn, k: u32, eps: f64, lambda: u32, a: f64) -> Result<Self> {
        let constants = choose_constants(a, k as f64, lambda, k)?;
        let delta = delta_fn(k, eps, lambda)?;
        let psi = psi_fn(f1, k, eps, lambda)?;
        let (dl, ps) = (delta.clone(), psi.clone());
        let lo = lambda as f64 + 1.0;
        let phi = DecreasingFn::computed("phi", Interval::open(lo, f64::INFINITY), move |t| {
            let d = dl.value(t);
            if d.is_infinite() {
                return f64::INFINITY;
            }
            let p = ps.value(t);
            if p == 0.0 {
                0.0
            } else {
                d * p
            }
        })?;
        let phi_inv = phi.gen_inverse();
        Ok(TheoremA {
            eps,
            k,
            constants,
            f1: f1.clone(),
            delta,
            psi,
            phi,
            phi_inv,
        })
    }

    /// `a^{phi^-(d / D)}` for a boundary distance `d`.
    pub fn bound_at(&self, dist: f64) -> f64 {
        let e = self.phi.inverse_value(dist / self.constants.d);
        pow_a(self.constants.a, e)
    }

    pub fn bound(&self, x: &[f64], omega: &Region) -> Result<f64> {
        Ok(self.bound_at(omega.boundary_dist(x)?))
    }

    /// Rows `(t, delta, psi, phi)` on the given grid.
    pub fn write_csv(&self, path: &Path, ts: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "delta", "psi", "phi"])?;
        for &t in ts {
            w.write_record([
                format!("{t:.12e}"),
                format!("{:.12e}", self.delta.value(t)),
                format!("{:.12e}", self.psi.value(t)),
                format!("{:.12e}", self.phi.value(t)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Schedule of balls for the Monte Carlo estimate of `mu`.
#[derive(Debug, Clone, Serialize)]
pub struct BallSchedule {
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub samples: usize,
}

impl BallSchedule {
    /// Centers on a 9-per-axis lattice of the bounding box, radii log-spaced
    /// from 1/64 to 1/2 of the region scale.
    pub fn default_for(omega: &Region, samples: usize) -> Self {
        let (lo, hi) = omega.bounding_box();
        let k = lo.len();
        let m = 9usize;
        let mut centers = Vec::new();
        for idx in 0..m.pow(k as u32) {
            let mut rem = idx;
            let c: Vec<f64> = (0..k)
                .map(|i| {
                    let j = rem % m;
                    rem /= m;
                    lo[i] + (hi[i] - lo[i]) * (j as f64 + 0.5) / m as f64
                })
                .collect();
            if omega.contains(&c) {
                centers.push(c);
            }
        }
        let scale = omega.scale();
        BallSchedule {
            centers,
            radii: log_space(scale / 64.0, scale / 2.0, 6),
            samples,
        }
    }
}

/// Inputs for the closed-form upper bound on `mu` when `F = g(dist(., A))`
/// with `A` admissible: `mu(nu) <= min(C1 (g^-(a^nu))^q*, S1 R_in^q*)`.
#[derive(Debug, Clone)]
pub struct AnalyticMu {
    pub g: DecreasingFn,
    pub c1: f64,
    /// Inradius of the region (largest ball inside it).
    pub inradius: f64,
    /// Values of `F` above the cap are not attained.
    pub cap: Option<f64>,
}

/// How `mu` is obtained.
#[derive(Debug, Clone)]
pub enum MuSource {
    Analytic(AnalyticMu),
    MonteCarlo {
        field: Majorant,
        schedule: BallSchedule,
        nu_grid: Vec<f64>,
        seed: u64,
    },
}

/// `mu_q*(nu) = sup_B m({F >= a^nu} cap B) / R^p*` over balls inside the region.
pub fn mu_q_estimate(source: &MuSource, omega: &Region, a: f64, p_star: f64) -> Result<DecreasingFn> {
    let k = omega.dim();
    if !(p_star > 0.0 && p_star < k as f64) {
        return Err(Error::Argument(format!("p* must lie in (0, {k})")));
    }
    let q_star = k as f64 - p_star;
    let s1 = unit_ball_volume(k as u32);
    let ln_a = a.ln();
    match source {
        MuSource::Analytic(an) => {
            let top = s1 * an.inradius.powf(q_star);
            let nu_cap = an.cap.map_or(f64::INFINITY, |c| c.ln() / ln_a);
            let g = an.g.clone();
            let gi = an.g.clone();
            let c1 = an.c1;
            let g_inf = an.g.lower_limit();
            let mu = move |nu: f64| {
                if nu > nu_cap {
                    return 0.0;
                }
                let level = (nu * ln_a).exp();
                if level <= g_inf {
                    return top;
                }
                let sigma = g.inverse_value(level);
                (c1 * sigma.powf(q_star)).min(top)
            };
            let inv = move |s: f64| {
                if s >= top {
                    return 0.0;
                }
                if s <= 0.0 {
                    return nu_cap;
                }
                let r = (s / c1).powf(1.0 / q_star);
                let e = (gi.value(r).ln() / ln_a).max(0.0);
                e.min(nu_cap)
            };
            Ok(DecreasingFn::computed("mu (analytic)", Interval::open(0.0, f64::INFINITY), mu)?
                .with_inverse(inv))
        }
        MuSource::MonteCarlo {
            field,
            schedule,
            nu_grid,
            seed,
        } => {
            if nu_grid.len() < 2 || nu_grid.windows(2).any(|w| !(w[0] < w[1])) || nu_grid[0] <= 0.0 {
                return Err(Error::Argument("nu-grid must be positive and increasing".into()));
            }
            let levels: Vec<f64> = nu_grid.iter().map(|nu| (nu * ln_a).exp()).collect();
            let mut balls = Vec::new();
            for c in &schedule.centers {
                let inner = omega.boundary_dist(c).unwrap_or(0.0);
                for &r in &schedule.radii {
                    if r < inner {
                        balls.push((c.clone(), r));
                    }
                }
            }
            if balls.is_empty() {
                return Err(Error::Argument("no probe ball fits inside the region".into()));
            }
            let per_ball: Vec<Vec<f64>> = balls
                .par_iter()
                .enumerate()
                .map(|(i, (c, r))| {
                    let mut rng = shard_rng(derive_seed(*seed, i as u64), 0);
                    let vol = s1 * r.powi(k as i32);
                    let vals: Vec<f64> = (0..schedule.samples)
                        .map(|_| {
                            let p = sample_in_ball(&mut rng, k, *r);
                            let x: Vec<f64> = c.iter().zip(&p).map(|(a, b)| a + b).collect();
                            field.eval(&x)
                        })
                        .collect();
                    levels
                        .iter()
                        .map(|&lv| {
                            let hits = vals.iter().filter(|&&v| v >= lv).count();
                            vol * hits as f64 / schedule.samples as f64 / r.powf(p_star)
                        })
                        .collect()
                })
                .collect();
            let sup: Vec<f64> = (0..levels.len())
                .map(|j| per_ball.iter().map(|row| row[j]).fold(0.0, f64::max))
                .collect();
            let mut knots: Vec<[f64; 2]> = Vec::new();
            for (nu, v) in nu_grid.iter().zip(&sup) {
                if knots.len() >= 2 {
                    let n = knots.len();
                    if knots[n - 1][1] == *v && knots[n - 2][1] == *v {
                        knots.pop();
                    }
                }
                knots.push([*nu, *v]);
            }
            DecreasingFn::tabulated_nonnegative(crate::monotone::Table::new(knots)?)
        }
    }
}

/// Theorem-B data: `mu`, `rho` and the constants.
#[derive(Debug, Clone)]
pub struct TheoremB {
    pub p_star: f64,
    pub q_star: f64,
    pub constants: DomarConstants,
    pub mu: DecreasingFn,
    pub rho: DecreasingFn,
    pub rho_inv: DecreasingFn,
}

/// One value of `rho`; see [`rho_fn`].
pub fn rho_value(mu: &DecreasingFn, q_star: f64, lambda: f64, t: f64, tol: Tolerance) -> Result<f64> {
    let nu = t - lambda;
    if nu <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let top = mu.value(nu);
    if top <= 0.0 {
        return Ok(0.0);
    }
    let upper = top.powf(1.0 / q_star);
    let shift = 1.0 + lambda - t;
    let q = integrate_left_singular(
        |u| mu.inverse_value(u.powf(q_star)) + shift,
        0.0,
        upper,
        tol,
    )?;
    Ok(q.value)
}

/// `rho(t) = int_0^{mu(t - lambda)^(1/q*)} (mu^-(u^q*) - t + 1 + lambda) du`
/// on `(lambda, inf)`; integrability near 0 is probed at `t = lambda + 1`.
pub fn rho_fn(mu: &DecreasingFn, q_star: f64, lambda: u32) -> Result<DecreasingFn> {
    let l = lambda as f64;
    let tol = Tolerance::relative(1e-10);
    rho_value(mu, q_star, l, l + 1.0, tol)?;
    let mu = mu.clone();
    DecreasingFn::computed("rho", Interval::open(l, f64::INFINITY), move |t| {
        rho_value(&mu, q_star, l, t, tol).unwrap_or(f64::INFINITY)
    })
}

impl TheoremB {
    pub fn new(mu: &DecreasingFn, k: u32, p_star: f64, lambda: u32, a: f64) -> Result<Self> {
        let q_star = k as f64 - p_star;
        let constants = choose_constants(a, q_star, lambda, k)?;
        let rho = rho_fn(mu, q_star, lambda)?;
        let rho_inv = rho.gen_inverse();
        Ok(TheoremB {
            p_star,
            q_star,
            constants,
            mu: mu.clone(),
            rho,
            rho_inv,
        })
    }

    pub fn bound_at(&self, dist: f64) -> f64 {
        let e = self.rho.inverse_value(dist / self.constants.d);
        pow_a(self.constants.a, e)
    }

    pub fn bound(&self, x: &[f64], omega: &Region) -> Result<f64> {
        Ok(self.bound_at(omega.boundary_dist(x)?))
    }

    /// Rows `(nu, mu, rho)`, with `rho` evaluated at `nu + lambda`.
    pub fn write_csv(&self, path: &Path, nus: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["nu", "mu", "rho"])?;
        let l = self.constants.lambda as f64;
        for &nu in nus {
            w.write_record([
                format!("{nu:.12e}"),
                format!("{:.12e}", self.mu.value(nu)),
                format!("{:.12e}", self.rho.value(nu + l)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Inradius of a region: the largest boundary distance over a lattice,
/// refined around the best lattice point.
pub fn inradius(omega: &Region) -> f64 {
    let (lo, hi) = omega.bounding_box();
    let k = lo.len();
    let m: usize = if k == 2 { 33 } else { 13 };
    let mut best = (0.0, lo.clone());
    for idx in 0..m.pow(k as u32) {
        let mut rem = idx;
        let c: Vec<f64> = (0..k)
            .map(|i| {
                let j = rem % m;
                rem /= m;
                lo[i] + (hi[i] - lo[i]) * (j as f64 + 0.5) / m as f64
            })
            .collect();
        if let Ok(d) = omega.boundary_dist(&c) {
            if d > best.0 {
                best = (d, c);
            }
        }
    }
    let mut step = norm(&sub(&hi, &lo)) / m as f64;
    for _ in 0..40 {
        let mut improved = false;
        for i in 0..k {
            for sgn in [-1.0, 1.0] {
                let mut c = best.1.clone();
                c[i] += sgn * step;
                if let Ok(d) = omega.boundary_dist(&c) {
                    if d > best.0 {
                        best = (d, c);
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best.0
}

/// Shared handle for majorant data used by several evaluators.
pub type SharedA = Arc<TheoremA>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_for_the_plane() {
        let c = choose_constants(std::f64::consts::E, 2.0, 1, 2).unwrap();
        assert!((c.d - 1.169965).abs() < 1e-5, "{}", c.d);
        assert!((c.feasibility() - 1.0).abs() < 1e-12);
        assert!(feasibility(c.a, 2.0, 1, c.d - 1e-6, c.s1) > 1.0);
    }

    #[test]
    fn delta_plug_in() {
        let d = delta_fn(2, 1.0, 1).unwrap();
        assert!((d.eval(3.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(d.value(1e12) < 1e-5);
    }

    #[test]
    fn power_rho_closed_form() {
        let a = 2.0f64;
        let (b, q) = (1.0, 1.0);
        let g = DecreasingFn::power_law(1.0, b).unwrap();
        let mu = DecreasingFn::computed("mu", Interval::open(0.0, f64::INFINITY), move |nu| {
            a.powf(-nu * q / b)
        })
        .unwrap()
        .with_inverse(move |s| (g.value(s.powf(1.0 / q)).ln() / a.ln()).max(0.0));
        let rho = rho_fn(&mu, q, 1).unwrap();
        for t in [1.5, 2.0, 4.0, 9.0] {
            let want = (1.0 + b / a.ln()) * a.powf(-(t - 1.0) / b);
            let got = rho.value(t);
            assert!(((got - want) / want).abs() < 1e-7, "t {t}: {got} vs {want}");
        }
    }
}
