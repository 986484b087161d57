use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domar::{mu_q_estimate, AnalyticMu, MuSource, TheoremA, TheoremB};
use crate::error::{Error, Result};
use crate::monotone::{DecreasingFn, Interval};

use super::scenario::SCHEMA_VERSION;

/// Radial profile of `F(x) = profile(|x - center|)` on a disk centred at
/// the singular point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `c r^-b`.
    PowerLaw {
        #[serde(default = "one")]
        c: f64,
        b: f64,
    },
    Constant { value: f64 },
}

fn one() -> f64 {
    1.0
}

fn e() -> f64 {
    std::f64::consts::E
}

fn default_points() -> usize {
    64
}

fn default_lambda() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremASpec {
    pub eps: Option<f64>,
    #[serde(default = "default_lambda")]
    pub lambda: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremBSpec {
    #[serde(default = "default_lambda")]
    pub lambda: u32,
}

/// Side-by-side evaluation of the two Domar bounds for a radial majorant on
/// a disk, where both the distribution function and `mu` are exact:
/// `|{F > s}| = pi min(g^-(s), R)^2` and a point has the tube constant `pi`
/// with `p* = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "one")]
    pub radius: f64,
    pub profile: Profile,
    #[serde(default = "e")]
    pub a: f64,
    pub theorem_a: TheoremASpec,
    pub theorem_b: TheoremBSpec,
    /// Ray samples, log-spaced in boundary distance.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Smallest boundary distance, relative to the radius.
    pub d_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareRow {
    pub dist: f64,
    pub bound_a: f64,
    pub bound_b: f64,
    pub ratio: f64,
}

fn config(field: &str, message: impl Into<String>) -> Error {
    Error::config(field, message)
}

impl CompareSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: CompareSpec = serde_json::from_str(text).map_err(|e| {
            config(
                "",
                format!("{e} (line {} column {})", e.line(), e.column()),
            )
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(config("radius", "must be positive"));
        }
        match self.profile {
            Profile::PowerLaw { c, b } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(config("profile.c", "must be positive"));
                }
                if !(b > 0.0 && b.is_finite()) {
                    return Err(config("profile.b", "must be positive"));
                }
            }
            Profile::Constant { value } => {
                if !(value > 1.0 && value.is_finite()) {
                    return Err(config("profile.value", "must exceed 1"));
                }
            }
        }
        if !(self.a > 1.0 && self.a.is_finite()) {
            return Err(config("a", "must exceed 1"));
        }
        match self.theorem_a.eps {
            None => return Err(config("theorem_a.eps", "missing")),
            Some(e) if !(e > 0.0 && e.is_finite()) => return Err(config("theorem_a.eps", "must be positive")),
            _ => {}
        }
        if self.theorem_a.lambda == 0 {
            return Err(config("theorem_a.lambda", "must be at least 1"));
        }
        if self.theorem_b.lambda == 0 {
            return Err(config("theorem_b.lambda", "must be at least 1"));
        }
        if self.points < 2 {
            return Err(config("points", "need at least 2"));
        }
        if !(self.d_min > 0.0 && self.d_min < 0.5) {
            return Err(config("d_min", "must lie in (0, 0.5)"));
        }
        Ok(())
    }

    fn cap(&self) -> Option<f64> {
        match self.profile {
            Profile::Constant { value } => Some(value),
            Profile::PowerLaw { .. } => None,
        }
    }

    /// Distribution function `s -> |{F > s}|`.
    fn distribution(&self) -> Result<DecreasingFn> {
        let area = PI * self.radius * self.radius;
        let dom = Interval::open(0.0, f64::INFINITY);
        Ok(match self.profile {
            Profile::PowerLaw { c, b } => {
                let r = self.radius;
                DecreasingFn::computed("disk distribution", dom, move |s| {
                    PI * (c / s).powf(1.0 / b).min(r).powi(2)
                })?
                .with_inverse(move |v| if v >= area { 0.0 } else { c * (v / PI).powf(-b / 2.0) })
            }
            Profile::Constant { value } => {
                DecreasingFn::computed("constant distribution", dom, move |s| if s < value { area } else { 0.0 })?
                    .with_inverse(move |v| if v >= area { 0.0 } else { value })
            }
        })
    }

    /// `mu(nu)` with `p* = 1`.
    fn mu(&self) -> Result<DecreasingFn> {
        let omega = crate::geometry::Region::Ball {
            center: vec![0.0, 0.0],
            radius: self.radius,
        };
        match self.profile {
            Profile::PowerLaw { c, b } => {
                let src = MuSource::Analytic(AnalyticMu {
                    g: DecreasingFn::power_law(c, b)?,
                    c1: PI,
                    inradius: self.radius,
                    cap: None,
                });
                mu_q_estimate(&src, &omega, self.a, 1.0)
            }
            Profile::Constant { value } => {
                let top = PI * self.radius;
                let nu_c = value.ln() / self.a.ln();
                Ok(DecreasingFn::computed("constant mu", Interval::open(0.0, f64::INFINITY), move |nu| {
                    if nu <= nu_c {
                        top
                    } else {
                        0.0
                    }
                })?
                .with_inverse(move |s| if s >= top { 0.0 } else { nu_c }))
            }
        }
    }
}

/// Both bounds at log-spaced boundary distances from `R/2` down to
/// `d_min R`, ordered toward the boundary. Bounds are capped by the
/// majorant's supremum when it is finite.
pub fn run_compare(spec: &CompareSpec) -> Result<Vec<CompareRow>> {
    spec.validate()?;
    let eps = spec.theorem_a.eps.expect("validated");
    let f1 = crate::measure::f1_transform(&spec.distribution()?, spec.a)?;
    let thm_a = TheoremA::new(&f1, 2, eps, spec.theorem_a.lambda, spec.a)?;
    let thm_b = TheoremB::new(&spec.mu()?, 2, 1.0, spec.theorem_b.lambda, spec.a)?;
    let cap = spec.cap().unwrap_or(f64::INFINITY);
    let (hi, lo) = ((0.5 * spec.radius).ln(), (spec.d_min * spec.radius).ln());
    let n = spec.points;
    Ok((0..n)
        .map(|i| {
            let dist = (hi + (lo - hi) * i as f64 / (n - 1) as f64).exp();
            let bound_a = thm_a.bound_at(dist).min(cap);
            let bound_b = thm_b.bound_at(dist).min(cap);
            CompareRow {
                dist,
                bound_a,
                bound_b,
                ratio: bound_a / bound_b,
            }
        })
        .collect())
}

pub fn write_compare_csv(rows: &[CompareRow], path: &Path, header: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{header}")?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["dist", "bound_a", "bound_b", "ratio"])?;
    for r in rows {
        w.write_record([
            format!("{:.12e}", r.dist),
            format!("{:.12e}", r.bound_a),
            format!("{:.12e}", r.bound_b),
            format!("{:.12e}", r.ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}
