//! Improved majorants in terms of the distance to `B` alone.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bound::FloorTable;
use crate::domar::{choose_constants, pow_a, rho_value};
use crate::error::{Error, Result};
use crate::geometry::{log_space, AdmissibilityEstimate, ChartParams};
use crate::monotone::{ConcaveFn, DecreasingFn, Interval};
use crate::quad::{integrate_left_singular, Tolerance};

/// Points in the grids used to certify `v` and `tau1`.
pub const CERT_GRID: usize = 512;
/// Bisection steps for `v`.
pub const BISECTIONS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LipschitzTwoTerm,
    ConvexityUpgraded,
    AdmissibleRho,
    PowerTypeClosed,
}

impl Method {
    pub fn slug(self) -> &'static str {
        match self {
            Method::LipschitzTwoTerm => "lipschitz_two_term",
            Method::ConvexityUpgraded => "convexity_upgraded",
            Method::AdmissibleRho => "admissible_rho",
            Method::PowerTypeClosed => "power_type_closed",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Constants {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    /// Admissibility constant `max(C_hat, 1)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adm_c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau1: Option<f64>,
}

/// Grid on which a searched constant was validated, with the margins there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub grid: Vec<f64>,
    pub margins: Vec<f64>,
}

impl Certificate {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
enum Profile {
    TwoTerm { g: DecreasingFn, c1: f64, c2: f64 },
    /// `factor * g(v d)`.
    Scaled { g: DecreasingFn, v: f64, factor: f64 },
    /// `a^{rho^-(d / (3D))}`.
    RhoExp(Arc<AdmissibleRho>),
}

/// `u(x) <= h(dist(x, B))` for `dist(x, B) < tau`.
#[derive(Debug, Clone)]
pub struct ImprovedBound {
    pub method: Method,
    pub tau: f64,
    pub constants: Constants,
    pub certificate: Option<Certificate>,
    profile: Profile,
}

#[derive(Serialize)]
struct Record<'a> {
    method: Method,
    tau: f64,
    constants: &'a Constants,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate_min_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate_points: Option<usize>,
    profile: String,
}

impl ImprovedBound {
    pub fn eval(&self, d: f64) -> f64 {
        if !(d > 0.0) {
            return f64::INFINITY;
        }
        match &self.profile {
            Profile::TwoTerm { g, c1, c2 } => {
                let big = g.value(c1 * d);
                if big.is_infinite() {
                    big
                } else {
                    2.0 * big - g.value(c2 * d)
                }
            }
            Profile::Scaled { g, v, factor } => factor * g.value(v * d),
            Profile::RhoExp(r) => r.bound_at(d),
        }
    }

    /// Floor table of `h` over `[d_min, tau]`.
    pub fn floor_table(&self, d_min: f64, n: usize) -> FloorTable {
        FloorTable::build(|d| self.eval(d), d_min, self.tau, n)
    }

    /// JSON record with method, constants, tau and the certificate summary.
    pub fn record(&self) -> serde_json::Value {
        let rec = Record {
            method: self.method,
            tau: self.tau,
            constants: &self.constants,
            certificate_min_margin: self.certificate.as_ref().map(|c| c.min_margin()),
            certificate_points: self.certificate.as_ref().map(|c| c.grid.len()),
            profile: self.describe(),
        };
        serde_json::to_value(rec).expect("record serializes")
    }

    pub fn describe(&self) -> String {
        match &self.profile {
            Profile::TwoTerm { g, c1, c2 } => {
                format!("2 g({c1:e} d) - g({c2:e} d), g = {}", g.describe())
            }
            Profile::Scaled { g, v, factor } => {
                format!("{factor} g({v:e} d), g = {}", g.describe())
            }
            Profile::RhoExp(r) => format!("{}^(rho_ad^-(d / {:e}))", r.a, 3.0 * r.d),
        }
    }

    /// `(d, h(d))` on `n` log-spaced points of `[tau 1e-6, tau]`.
    pub fn write_csv(&self, path: &Path, n: usize) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["d", "h"])?;
        for d in log_space(self.tau * 1e-6, self.tau, n) {
            w.write_record([format!("{d:.12e}"), format!("{:.12e}", self.eval(d))])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `g` as `psi o eta_k` if possible: directly, or for `c t^-b` with
/// `k > 2` and `b <= k - 2` via `psi(s) = c s^(b/(k-2))`.
pub fn psi_eta_form(g: &DecreasingFn, k: u32) -> Option<(ConcaveFn, u32)> {
    if let Some((psi, kk)) = g.as_psi_eta() {
        return (kk == k).then(|| (psi.clone(), kk));
    }
    let (c, b) = g.as_power_law()?;
    if k > 2 && b <= (k - 2) as f64 {
        Some((
            ConcaveFn::Power {
                theta: b / (k - 2) as f64,
                coef: c,
            },
            k,
        ))
    } else {
        None
    }
}

/// `h(d) = 2 g(c1 d) - g(c2 d)`, `c1 = 1/(160 L^2)`, `c2 = 1/(10 L)`, `tau = R/2`.
pub fn lipschitz_improve(g: &DecreasingFn, k: u32, params: &ChartParams, alpha: f64) -> Result<ImprovedBound> {
    let Some((psi, _)) = psi_eta_form(g, k) else {
        return Err(Error::InvalidProfile(format!(
            "{} is not of the form psi o eta_{k} with concave psi",
            g.describe()
        )));
    };
    psi.validate()?;
    if alpha > g.domain().hi {
        return Err(Error::Chart(format!(
            "alpha = {alpha} exceeds the domain of g ({})",
            g.domain()
        )));
    }
    params.validate(alpha)?;
    let l = params.lipschitz;
    let c1 = 1.0 / (160.0 * l * l);
    let c2 = 1.0 / (10.0 * l);
    Ok(ImprovedBound {
        method: Method::LipschitzTwoTerm,
        tau: params.radius / 2.0,
        constants: Constants {
            c1: Some(c1),
            c2: Some(c2),
            lipschitz: Some(l),
            chart_radius: Some(params.radius),
            ..Default::default()
        },
        certificate: None,
        profile: Profile::TwoTerm {
            g: g.clone(),
            c1,
            c2,
        },
    })
}

/// Second divided differences of `t -> g(t^beta)` on a log grid of
/// `(0, delta^(1/beta)]` must be non-negative.
pub fn convexity_probe(g: &DecreasingFn, beta: f64, delta: f64) -> Result<()> {
    let top = delta.powf(1.0 / beta);
    let ts = log_space(top * 1e-4, top, 256);
    let f: Vec<f64> = ts.iter().map(|t| g.value(t.powf(beta))).collect();
    for i in 1..ts.len() - 1 {
        let s0 = (f[i] - f[i - 1]) / (ts[i] - ts[i - 1]);
        let s1 = (f[i + 1] - f[i]) / (ts[i + 1] - ts[i]);
        if s1 < s0 - 1e-9 * s0.abs().max(s1.abs()) {
            return Err(Error::UpgradeUnavailable(format!(
                "g(t^{beta}) is not convex near t = {:e}",
                ts[i]
            )));
        }
    }
    Ok(())
}

/// Largest `v` in `(0, c1]` with `2 g(c1 d) - g(c2 d) <= g(v d)` on a log
/// grid of `(0, tau1]`, halving `tau1` from `tau` when needed.
pub fn convexity_upgrade(g: &DecreasingFn, h: &ImprovedBound, beta: f64) -> Result<ImprovedBound> {
    let Profile::TwoTerm { c1, c2, .. } = h.profile else {
        return Err(Error::Argument("convexity upgrade needs a two-term bound".into()));
    };
    convexity_probe(g, beta, h.tau)?;
    let two = |d: f64| 2.0 * g.value(c1 * d) - g.value(c2 * d);
    let holds = |v: f64, grid: &[f64], lhs: &[f64]| grid.iter().zip(lhs).all(|(&d, &l)| l <= g.value(v * d));
    let mut tau1 = h.tau;
    for _ in 0..=10 {
        let grid = log_space(tau1 * 1e-8, tau1, CERT_GRID);
        let lhs: Vec<f64> = grid.iter().map(|&d| two(d)).collect();
        let (mut lo, mut hi) = (c1 / 1024.0, c1);
        if holds(lo, &grid, &lhs) {
            if holds(hi, &grid, &lhs) {
                lo = hi;
            }
            for _ in 0..BISECTIONS {
                let mid = 0.5 * (lo + hi);
                if holds(mid, &grid, &lhs) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let margins = grid.iter().zip(&lhs).map(|(&d, l)| g.value(lo * d) - l).collect();
            return Ok(ImprovedBound {
                method: Method::ConvexityUpgraded,
                tau: tau1,
                constants: Constants {
                    v: Some(lo),
                    tau1: Some(tau1),
                    ..h.constants.clone()
                },
                certificate: Some(Certificate { grid, margins }),
                profile: Profile::Scaled {
                    g: g.clone(),
                    v: lo,
                    factor: 1.0,
                },
            });
        }
        tau1 *= 0.5;
    }
    Err(Error::UpgradeUnavailable(format!(
        "no v >= c1/1024 validates on (0, tau1] down to tau1 = {tau1:e}"
    )))
}

/// `mu_ad`, `rho_ad` and their inverses for an admissible singular set.
#[derive(Debug, Clone)]
pub struct AdmissibleRho {
    pub g: DecreasingFn,
    pub a: f64,
    pub d: f64,
    pub c1: f64,
    pub p_star: f64,
    pub q_star: f64,
    pub mu: DecreasingFn,
    pub rho: DecreasingFn,
    pub rho_inv: DecreasingFn,
}

fn rho_parts(g: &DecreasingFn, a: f64, c1: f64, q_star: f64, nu: f64, tol: Tolerance) -> Result<f64> {
    let ln_a = a.ln();
    let sigma = g.inverse_log((nu - 1.0) * ln_a);
    if sigma.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if sigma <= 0.0 {
        return Ok(0.0);
    }
    let k0 = c1.powf(1.0 / q_star);
    let q = integrate_left_singular(
        |y| {
            let v = y * g.log_derivative(y).unwrap_or(f64::NAN);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        sigma,
        tol,
    )?;
    Ok(k0 * sigma - k0 / ln_a * q.value)
}

impl AdmissibleRho {
    /// `mu_ad(nu) = C1 (g^-(a^nu))^q*` and `rho_ad` from its integrated-by-parts
    /// form, with `lambda = 1` and `D = max(D_min, 1)`.
    pub fn new(g: &DecreasingFn, adm: &AdmissibilityEstimate, a: f64) -> Result<Self> {
        if !g.is_closed_form() {
            return Err(Error::InvalidProfile(format!(
                "{} has no closed-form derivative",
                g.describe()
            )));
        }
        let (p_star, q_star, c1) = (adm.p_star, adm.q_star, adm.c1);
        let k = (p_star + q_star).round() as u32;
        let consts = choose_constants(a, q_star, 1, k)?;
        let d = consts.d.max(1.0);
        let ln_a = a.ln();

        let (gm, gi) = (g.clone(), g.clone());
        let mu = DecreasingFn::computed("mu_ad", Interval::open(0.0, f64::INFINITY), move |nu| {
            c1 * gm.inverse_log(nu * ln_a).powf(q_star)
        })?
        .with_inverse(move |s| {
            if s <= 0.0 {
                return f64::INFINITY;
            }
            (gi.log_value((s / c1).powf(1.0 / q_star)) / ln_a).max(0.0)
        });

        let tol = Tolerance::relative(1e-11);
        for nu in [1.5, 4.0] {
            rho_parts(g, a, c1, q_star, nu, tol)?;
        }
        let gr = g.clone();
        let rho = DecreasingFn::computed("rho_ad", Interval::open(1.0, f64::INFINITY), move |nu| {
            rho_parts(&gr, a, c1, q_star, nu, tol).unwrap_or(f64::INFINITY)
        })?;
        let rho_inv = rho.gen_inverse();
        Ok(AdmissibleRho {
            g: g.clone(),
            a,
            d,
            c1,
            p_star,
            q_star,
            mu,
            rho,
            rho_inv,
        })
    }

    /// `rho_ad` from its defining Stieltjes form, for cross-checks.
    pub fn rho_direct(&self, nu: f64) -> Result<f64> {
        rho_value(&self.mu, self.q_star, 1.0, nu, Tolerance::relative(1e-11))
    }

    pub fn rho_inverse(&self, t: f64) -> f64 {
        self.rho.inverse_value(t)
    }

    /// `a^{rho^-(d / (3D))}`.
    pub fn bound_at(&self, d: f64) -> f64 {
        pow_a(self.a, self.rho_inverse(d / (3.0 * self.d)))
    }
}

fn rho_constants(r: &AdmissibleRho) -> Constants {
    Constants {
        a: Some(r.a),
        d: Some(r.d),
        adm_c1: Some(r.c1),
        p_star: Some(r.p_star),
        q_star: Some(r.q_star),
        ..Default::default()
    }
}

/// `h(d) = a^{rho_ad^-(d/(3D))}` with `tau = dist(A, boundary)/2`.
pub fn admissible_improve(
    g: &DecreasingFn,
    adm: &AdmissibilityEstimate,
    a: f64,
    dist_a_boundary: f64,
) -> Result<(ImprovedBound, Arc<AdmissibleRho>)> {
    let r = Arc::new(AdmissibleRho::new(g, adm, a)?);
    Ok((
        ImprovedBound {
            method: Method::AdmissibleRho,
            tau: dist_a_boundary / 2.0,
            constants: rho_constants(&r),
            certificate: None,
            profile: Profile::RhoExp(r.clone()),
        },
        r,
    ))
}

/// `|t (mu_ad^-)'(t)|` at `t`, i.e. `|y g'(y)/g(y)| / (q* ln a)` with `y = (t/C1)^(1/q*)`.
pub fn limit_probe_value(r: &AdmissibleRho, t: f64) -> f64 {
    let y = (t / r.c1).powf(1.0 / r.q_star);
    let lg = r.g.log_derivative(y).unwrap_or(f64::NAN);
    (y * lg).abs() / (r.q_star * r.a.ln())
}

/// Probes of the limit `q* lim t (mu_ad^-)'(t)` at `t = 1e-2, 1e-5, 1e-8, 1e-11`.
pub fn limit_probe(r: &AdmissibleRho) -> Result<Vec<(f64, f64)>> {
    let pts: Vec<(f64, f64)> = [1e-2, 1e-5, 1e-8, 1e-11]
        .iter()
        .map(|&t| (t, limit_probe_value(r, t)))
        .collect();
    let first = pts[0].1;
    let last = pts[pts.len() - 1].1;
    if !last.is_finite() || (first > 0.0 && last > 10.0 * first) {
        return Err(Error::LimitDiverges(format!(
            "L = -inf regime: |t (mu_ad^-)'(t)| grows from {first:e} to {last:e}"
        )));
    }
    Ok(pts)
}

/// `h(d) = a g(v d)` with `v` the largest value in `(0, 1)` that keeps
/// `a^{rho_ad^-(d/(3D))} <= a g(v d)` on a log grid of `(0, tau]`.
pub fn power_type_bound(rho: &Arc<AdmissibleRho>, tau: f64) -> Result<ImprovedBound> {
    limit_probe(rho)?;
    let g = &rho.g;
    let ln_a = rho.a.ln();
    let grid = log_space(tau * 1e-8, tau, CERT_GRID);
    // Compared in exponent form: rho^-(d/3D) - 1 <= log_a g(v d).
    let lhs: Vec<f64> = grid
        .iter()
        .map(|&d| rho.rho_inverse(d / (3.0 * rho.d)) - 1.0)
        .collect();
    let holds = |v: f64| {
        grid.iter()
            .zip(&lhs)
            .all(|(&d, &l)| l <= g.log_value(v * d) / ln_a)
    };
    let (mut lo, mut hi) = (1e-12f64, 1.0f64);
    if !holds(lo) {
        return Err(Error::UpgradeUnavailable(
            "no v >= 1e-12 keeps a g(v d) above the admissible bound".into(),
        ));
    }
    if holds(hi) {
        lo = hi;
    }
    for _ in 0..2 * BISECTIONS {
        let mid = (lo * hi).sqrt();
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let margins = grid
        .iter()
        .zip(&lhs)
        .map(|(&d, &l)| g.log_value(lo * d) / ln_a - l)
        .collect();
    Ok(ImprovedBound {
        method: Method::PowerTypeClosed,
        tau,
        constants: Constants {
            v: Some(lo),
            ..rho_constants(rho)
        },
        certificate: Some(Certificate { grid, margins }),
        profile: Profile::Scaled {
            g: g.clone(),
            v: lo,
            factor: rho.a,
        },
    })
}

/// Least-squares slope of `log rho_ad^-(t)` against `log(1/t)` over `n`
/// log-spaced points of `[t_lo, t_hi]`, for `g = exp(t^-alpha)`.
pub fn asymptotic_exponent(
    g: &DecreasingFn,
    adm: &AdmissibilityEstimate,
    a: f64,
    t_lo: f64,
    t_hi: f64,
    n: usize,
) -> Result<f64> {
    let Some(alpha) = g.as_exp_power() else {
        return Err(Error::Argument("asymptotic exponent needs g = exp(t^-alpha)".into()));
    };
    if !(alpha < 1.0) {
        return Err(Error::Argument(format!(
            "alpha must be below 1 for rho_ad to exist, got {alpha}"
        )));
    }
    let r = AdmissibleRho::new(g, adm, a)?;
    let ts = log_space(t_lo, t_hi, n.max(3));
    let xs: Vec<f64> = ts.iter().map(|t| -t.ln()).collect();
    let ys: Vec<f64> = ts.iter().map(|&t| r.rho_inverse(t).ln()).collect();
    Ok(ls_slope(&xs, &ys))
}

pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eta3() -> DecreasingFn {
        DecreasingFn::psi_eta(ConcaveFn::identity(), 3).unwrap()
    }

    #[test]
    fn two_term_constants() {
        let p = ChartParams {
            lipschitz: 2.0,
            radius: 0.5,
        };
        let h = lipschitz_improve(&eta3(), 3, &p, 1.0).unwrap();
        assert_eq!(h.constants.c1, Some(1.0 / 640.0));
        assert_eq!(h.constants.c2, Some(1.0 / 20.0));
        assert!((h.eval(0.1) - 12600.0).abs() < 1e-9);
        assert_eq!(h.tau, 0.25);
    }

    #[test]
    fn chart_radius_must_fit() {
        let p = ChartParams {
            lipschitz: 2.0,
            radius: 3.0,
        };
        assert!(matches!(lipschitz_improve(&eta3(), 3, &p, 1.0), Err(Error::Chart(_))));
    }

    #[test]
    fn upgrade_for_log_profile() {
        let g = DecreasingFn::psi_eta(ConcaveFn::identity(), 2).unwrap();
        let p = ChartParams {
            lipschitz: 2.0,
            radius: 0.5,
        };
        let h = lipschitz_improve(&g, 2, &p, 0.5).unwrap();
        let up = convexity_upgrade(&g, &h, 1.0).unwrap();
        let want = (1.0f64 / 640.0).powi(2) * 20.0;
        assert!((up.constants.v.unwrap() - want).abs() < 1e-9 * want);
    }

    #[test]
    fn power_rho_matches_closed_form() {
        let (b, a) = (1.0, std::f64::consts::E);
        let g = DecreasingFn::power_law(1.0, b).unwrap();
        let adm = AdmissibilityEstimate::exact(2, 1.0, 2.0);
        let r = AdmissibleRho::new(&g, &adm, a).unwrap();
        for nu in [1.5, 3.0, 10.0] {
            let want = (1.0 + b / a.ln()) * 2.0 * a.powf(-(nu - 1.0) / b);
            assert!((r.rho.value(nu) / want - 1.0).abs() < 1e-9);
            assert!((r.rho_direct(nu).unwrap() / want - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn exp_power_limit_diverges() {
        let g = DecreasingFn::exp_power(0.5).unwrap();
        let adm = AdmissibilityEstimate::exact(2, 1.0, 1.0);
        let (_, r) = admissible_improve(&g, &adm, 1.1, 1.0).unwrap();
        assert!(matches!(power_type_bound(&r, 0.5), Err(Error::LimitDiverges(_))));
    }
}
