//! Decreasing positive functions: evaluation, generalized inverses,
//! right-regularization and derivatives.

mod concave;
mod table;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use concave::ConcaveFn;
pub use table::Table;

use crate::error::{Error, Result};

/// Relative finite-difference step used where no closed-form derivative exists.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub lo_closed: bool,
    #[serde(default)]
    pub hi_closed: bool,
}

impl Interval {
    pub fn open(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn open_closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: false,
            hi_closed: true,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let above = if self.lo_closed { t >= self.lo } else { t > self.lo };
        let below = if self.hi_closed { t <= self.hi } else { t < self.hi };
        above && below
    }

    pub fn is_interior(&self, t: f64) -> bool {
        t > self.lo && t < self.hi
    }

    fn validate(&self) -> Result<()> {
        if self.lo.is_nan() || self.hi.is_nan() || !(self.lo < self.hi) {
            return Err(Error::Argument(format!(
                "interval needs lo < hi, got ({}, {})",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn subset_of(&self, other: &Interval) -> bool {
        let lo_ok = self.lo > other.lo
            || (self.lo == other.lo && (other.lo_closed || !self.lo_closed));
        let hi_ok = self.hi < other.hi
            || (self.hi == other.hi && (other.hi_closed || !self.hi_closed));
        lo_ok && hi_ok
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
struct Computed {
    name: String,
    f: RealFn,
    inverse: Option<RealFn>,
    derivative: Option<RealFn>,
}

#[derive(Clone)]
enum Kind {
    PowerLaw { c: f64, b: f64 },
    LogPower { b: f64, scale: f64 },
    ExpPower { alpha: f64 },
    PsiEta { psi: ConcaveFn, k: u32 },
    Tabulated(Table),
    Shifted { inner: Arc<DecreasingFn>, shift: f64 },
    Inverse(Arc<DecreasingFn>),
    Computed(Computed),
}

/// Serializable description of the closed-form and tabulated families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FnSpec {
    PowerLaw {
        #[serde(default = "one")]
        c: f64,
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Interval>,
    },
    LogPower {
        b: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Interval>,
    },
    ExpPower {
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Interval>,
    },
    PsiEta {
        psi: ConcaveFn,
        k: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Interval>,
    },
    Tabulated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        knots: Option<Vec<[f64; 2]>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
        #[serde(default)]
        right_continuous: bool,
    },
}

fn one() -> f64 {
    1.0
}

/// A non-increasing positive function on an interval, with its limits at
/// both ends. Infinite values are `f64::INFINITY`.
#[derive(Clone)]
pub struct DecreasingFn {
    kind: Kind,
    domain: Interval,
}

impl fmt::Debug for DecreasingFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} on {}", self.describe(), self.domain)
    }
}

impl DecreasingFn {
    pub fn power_law(c: f64, b: f64) -> Result<Self> {
        if !(c > 0.0 && b > 0.0 && c.is_finite() && b.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "power law needs C > 0 and b > 0, got C = {c}, b = {b}"
            )));
        }
        Ok(DecreasingFn {
            kind: Kind::PowerLaw { c, b },
            domain: Interval::open(0.0, f64::INFINITY),
        })
    }

    pub fn log_power(b: f64, scale: f64) -> Result<Self> {
        if !(b > 0.0 && scale > 0.0 && b.is_finite() && scale.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "log power needs b > 0 and scale > 0, got b = {b}, scale = {scale}"
            )));
        }
        Ok(DecreasingFn {
            kind: Kind::LogPower { b, scale },
            domain: Interval::open_closed(0.0, scale * (-1f64).exp()),
        })
    }

    pub fn exp_power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "exp power needs alpha > 0, got {alpha}"
            )));
        }
        Ok(DecreasingFn {
            kind: Kind::ExpPower { alpha },
            domain: Interval::open(0.0, f64::INFINITY),
        })
    }

    /// `psi(eta_k(t))` on the radii where `eta_k` stays inside the domain of psi.
    pub fn psi_eta(psi: ConcaveFn, k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::Argument(format!("dimension k must be >= 2, got {k}")));
        }
        psi.validate()?;
        let beta = psi.beta();
        let hi = eta_inverse(k, beta);
        Ok(DecreasingFn {
            kind: Kind::PsiEta { psi, k },
            domain: Interval::open(0.0, hi),
        })
    }

    pub fn tabulated(table: Table) -> Result<Self> {
        table.validate()?;
        if table.last_value() <= 0.0 {
            return Err(Error::InvalidProfile(
                "tabulated values must stay positive".into(),
            ));
        }
        let domain = Interval::closed(table.t_min(), table.t_max());
        Ok(DecreasingFn {
            kind: Kind::Tabulated(table),
            domain,
        })
    }

    /// Table whose values may reach zero, as distribution functions do.
    pub fn tabulated_nonnegative(table: Table) -> Result<Self> {
        table.validate()?;
        if table.last_value() < 0.0 {
            return Err(Error::InvalidProfile("tabulated values must be >= 0".into()));
        }
        let domain = Interval::closed(table.t_min(), table.t_max());
        Ok(DecreasingFn {
            kind: Kind::Tabulated(table),
            domain,
        })
    }

    /// Tabulated function from a two-column CSV `(t, value)` with an optional
    /// header row.
    pub fn tabulated_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .from_path(path)?;
        let mut knots = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() < 2 {
                return Err(Error::Argument(format!(
                    "{}: expected two columns",
                    path.display()
                )));
            }
            let (Ok(t), Ok(v)) = (
                record[0].trim().parse::<f64>(),
                record[1].trim().parse::<f64>(),
            ) else {
                if knots.is_empty() {
                    continue;
                }
                return Err(Error::Argument(format!(
                    "{}: non-numeric row {:?}",
                    path.display(),
                    record
                )));
            };
            knots.push([t, v]);
        }
        DecreasingFn::tabulated(Table::new(knots)?)
    }

    /// A function given by a closure on `domain`. The closure is evaluated at
    /// the domain ends (and far out for an infinite right end) to obtain the
    /// limits, so it must return sensible values there, `INFINITY` included.
    pub fn computed<F>(name: &str, domain: Interval, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        domain.validate()?;
        Ok(DecreasingFn {
            kind: Kind::Computed(Computed {
                name: name.to_string(),
                f: Arc::new(f),
                inverse: None,
                derivative: None,
            }),
            domain,
        })
    }

    /// Attach a closed-form generalized inverse to a computed function.
    pub fn with_inverse<F>(mut self, inv: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if let Kind::Computed(c) = &mut self.kind {
            c.inverse = Some(Arc::new(inv));
        }
        self
    }

    pub fn with_derivative<F>(mut self, d: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if let Kind::Computed(c) = &mut self.kind {
            c.derivative = Some(Arc::new(d));
        }
        self
    }

    /// `t -> f(t - shift)`.
    pub fn shifted(&self, shift: f64) -> Self {
        let d = self.domain;
        DecreasingFn {
            kind: Kind::Shifted {
                inner: Arc::new(self.clone()),
                shift,
            },
            domain: Interval {
                lo: d.lo + shift,
                hi: d.hi + shift,
                ..d
            },
        }
    }

    /// Restrict to a sub-interval of the natural domain.
    pub fn restrict(mut self, domain: Interval) -> Result<Self> {
        domain.validate()?;
        if !domain.subset_of(&self.domain) {
            return Err(Error::Argument(format!(
                "domain {domain} is not inside the natural domain {}",
                self.domain
            )));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn from_spec(spec: &FnSpec, base_dir: Option<&Path>) -> Result<Self> {
        let (f, domain) = match spec {
            FnSpec::PowerLaw { c, b, domain } => (Self::power_law(*c, *b)?, domain),
            FnSpec::LogPower { b, scale, domain } => (Self::log_power(*b, *scale)?, domain),
            FnSpec::ExpPower { alpha, domain } => (Self::exp_power(*alpha)?, domain),
            FnSpec::PsiEta { psi, k, domain } => (Self::psi_eta(psi.clone(), *k)?, domain),
            FnSpec::Tabulated {
                knots,
                csv,
                right_continuous,
            } => {
                let mut f = match (knots, csv) {
                    (Some(k), None) => Self::tabulated(Table::new(k.clone())?)?,
                    (None, Some(p)) => {
                        let path = match base_dir {
                            Some(dir) => dir.join(p),
                            None => p.into(),
                        };
                        Self::tabulated_csv(&path)?
                    }
                    _ => {
                        return Err(Error::Argument(
                            "tabulated function needs exactly one of `knots` or `csv`".into(),
                        ))
                    }
                };
                if *right_continuous {
                    f = f.right_regularize();
                }
                return Ok(f);
            }
        };
        match domain {
            Some(d) => f.restrict(*d),
            None => Ok(f),
        }
    }

    /// The serializable description, when the function belongs to a
    /// closed-form or tabulated family.
    pub fn spec(&self) -> Option<FnSpec> {
        let natural = match &self.kind {
            Kind::PowerLaw { c, b } => Self::power_law(*c, *b).ok()?.domain,
            Kind::LogPower { b, scale } => Self::log_power(*b, *scale).ok()?.domain,
            Kind::ExpPower { alpha } => Self::exp_power(*alpha).ok()?.domain,
            Kind::PsiEta { psi, k } => Self::psi_eta(psi.clone(), *k).ok()?.domain,
            _ => self.domain,
        };
        let domain = (natural != self.domain).then_some(self.domain);
        Some(match &self.kind {
            Kind::PowerLaw { c, b } => FnSpec::PowerLaw {
                c: *c,
                b: *b,
                domain,
            },
            Kind::LogPower { b, scale } => FnSpec::LogPower {
                b: *b,
                scale: *scale,
                domain,
            },
            Kind::ExpPower { alpha } => FnSpec::ExpPower {
                alpha: *alpha,
                domain,
            },
            Kind::PsiEta { psi, k } => FnSpec::PsiEta {
                psi: psi.clone(),
                k: *k,
                domain,
            },
            Kind::Tabulated(t) => FnSpec::Tabulated {
                knots: Some(t.knots.clone()),
                csv: None,
                right_continuous: t.right_continuous,
            },
            _ => return None,
        })
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            Kind::PowerLaw { c, b } => format!("{c}*t^-{b}"),
            Kind::LogPower { b, scale } => format!("log({scale}/t)^{b}"),
            Kind::ExpPower { alpha } => format!("exp(t^-{alpha})"),
            Kind::PsiEta { psi, k } => format!("psi(eta_{k}(t)), psi = {psi:?}"),
            Kind::Tabulated(t) => format!("table with {} knots", t.knots.len()),
            Kind::Shifted { inner, shift } => format!("({})(t - {shift})", inner.describe()),
            Kind::Inverse(inner) => format!("inverse of [{}]", inner.describe()),
            Kind::Computed(c) => c.name.clone(),
        }
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn as_table(&self) -> Option<&Table> {
        match &self.kind {
            Kind::Tabulated(t) => Some(t),
            _ => None,
        }
    }

    /// `(C, b)` when the function is exactly `C t^-b`.
    pub fn as_power_law(&self) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::PowerLaw { c, b } => Some((*c, *b)),
            _ => None,
        }
    }

    pub fn as_exp_power(&self) -> Option<f64> {
        match &self.kind {
            Kind::ExpPower { alpha } => Some(*alpha),
            _ => None,
        }
    }

    pub fn as_log_power(&self) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::LogPower { b, scale } => Some((*b, *scale)),
            _ => None,
        }
    }

    /// `(psi, k)` when the function is of the form `psi o eta_k`.
    pub fn as_psi_eta(&self) -> Option<(&ConcaveFn, u32)> {
        match &self.kind {
            Kind::PsiEta { psi, k } => Some((psi, *k)),
            _ => None,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(
            self.kind,
            Kind::PowerLaw { .. } | Kind::LogPower { .. } | Kind::ExpPower { .. } | Kind::PsiEta { .. }
        )
    }

    /// Raw formula, no domain handling.
    fn formula(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::PowerLaw { c, b } => c * t.powf(-b),
            Kind::LogPower { b, scale } => (scale / t).ln().powf(*b),
            Kind::ExpPower { alpha } => {
                let e = t.powf(-alpha);
                if e > 709.0 {
                    f64::INFINITY
                } else {
                    e.exp()
                }
            }
            Kind::PsiEta { psi, k } => {
                let e = eta(*k, t);
                if e.is_infinite() {
                    f64::INFINITY
                } else {
                    psi.eval(e)
                }
            }
            Kind::Tabulated(table) => table.value(t),
            Kind::Shifted { inner, shift } => inner.value(t - shift),
            Kind::Inverse(inner) => inner.inverse_value(t),
            Kind::Computed(c) => (c.f)(t),
        }
    }

    /// `lim f(t)` as `t` decreases to the left end (the value there when closed).
    pub fn upper_limit(&self) -> f64 {
        match &self.kind {
            Kind::PowerLaw { .. } | Kind::LogPower { .. } | Kind::ExpPower { .. }
                if self.domain.lo == 0.0 =>
            {
                f64::INFINITY
            }
            Kind::PsiEta { .. } if self.domain.lo == 0.0 => f64::INFINITY,
            Kind::Shifted { inner, .. } if !self.domain.lo_closed => inner.upper_limit(),
            Kind::Inverse(inner) => inner.domain.hi,
            _ => self.formula(self.domain.lo),
        }
    }

    /// `lim f(t)` as `t` increases to the right end, i.e. the infimum of `f`.
    pub fn lower_limit(&self) -> f64 {
        let d = self.domain;
        match &self.kind {
            Kind::Inverse(inner) => inner.domain.lo,
            Kind::Shifted { inner, .. } if d.hi.is_infinite() => inner.lower_limit(),
            _ if d.hi.is_infinite() => {
                let v = match self.formula(f64::INFINITY) {
                    v if v.is_nan() => self.formula(1e300),
                    v => v,
                };
                if v.is_nan() {
                    0.0
                } else {
                    v.max(0.0)
                }
            }
            _ => self.formula(d.hi),
        }
    }

    /// Value with the domain check.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !self.domain.contains(t) {
            return Err(Error::Domain {
                value: t,
                domain: self.domain.to_string(),
            });
        }
        Ok(self.formula(t))
    }

    /// Value extended to the whole line: the upper limit left of the domain,
    /// the lower limit right of it.
    pub fn value(&self, t: f64) -> f64 {
        let d = self.domain;
        if t < d.lo || (t == d.lo && !d.lo_closed) {
            return self.upper_limit();
        }
        if t > d.hi || (t == d.hi && !d.hi_closed) {
            return self.lower_limit();
        }
        self.formula(t)
    }

    /// The generalized inverse `s -> inf { t in domain : f(t) <= s }`, as a
    /// function on `(lower_limit, inf)`.
    pub fn gen_inverse(&self) -> DecreasingFn {
        let lo = self.lower_limit();
        DecreasingFn {
            kind: Kind::Inverse(Arc::new(self.clone())),
            domain: Interval::open(lo, f64::INFINITY),
        }
    }

    /// Right-continuous version of the function. Only tables with jumps change.
    pub fn right_regularize(&self) -> DecreasingFn {
        match &self.kind {
            Kind::Tabulated(t) => DecreasingFn {
                kind: Kind::Tabulated(Table {
                    right_continuous: true,
                    ..t.clone()
                }),
                domain: self.domain,
            },
            Kind::Shifted { inner, shift } => inner.right_regularize().shifted(*shift),
            _ => self.clone(),
        }
    }

    /// `inf { t : f(t) <= s }` evaluated directly. Returns the left end when
    /// `s` is at least the upper limit and the right end when `s` is below
    /// the range.
    pub fn inverse_value(&self, s: f64) -> f64 {
        let d = self.domain;
        if s.is_nan() {
            return f64::NAN;
        }
        if s >= self.upper_limit() {
            return d.lo;
        }
        if s < self.lower_limit() {
            return d.hi;
        }
        let guess = match &self.kind {
            Kind::PowerLaw { c, b } => Some((c / s).powf(1.0 / b)),
            Kind::LogPower { b, scale } => Some(scale * (-s.powf(1.0 / b)).exp()),
            Kind::ExpPower { alpha } => Some(s.ln().powf(-1.0 / alpha)),
            Kind::PsiEta { psi, k } => psi.inverse(s).map(|sigma| {
                if sigma <= psi.beta() {
                    d.hi
                } else {
                    eta_inverse(*k, sigma)
                }
            }),
            Kind::Tabulated(table) => return table.inverse(s),
            Kind::Shifted { inner, shift } => return inner.inverse_value(s) + shift,
            Kind::Inverse(inner) => return inner.right_value(s),
            Kind::Computed(c) => c.inverse.as_ref().map(|inv| inv(s)),
        };
        match guess {
            Some(t) if t.is_finite() || d.hi.is_infinite() => self.polish(t.clamp(d.lo, d.hi), s),
            _ => self.bisect_inverse(s),
        }
    }

    /// Value of the right-continuous version.
    fn right_value(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Tabulated(table) if !table.right_continuous => {
                self.right_regularize().value(t)
            }
            _ => self.value(t),
        }
    }

    fn polish(&self, mut t: f64, s: f64) -> f64 {
        if t.is_infinite() {
            return t;
        }
        let mut step = f64::EPSILON * t.abs().max(1e-300);
        for _ in 0..80 {
            if !(self.value(t) > s) || t >= self.domain.hi {
                return t.min(self.domain.hi);
            }
            t += step;
            step *= 2.0;
        }
        t
    }

    fn bisect_inverse(&self, s: f64) -> f64 {
        let d = self.domain;
        let lo = d.lo;
        let at = |w: f64| self.value(lo + w);
        let mut hi_w = if d.hi.is_finite() {
            d.hi - lo
        } else {
            let mut w = lo.abs().max(1.0);
            while at(w) > s {
                w *= 2.0;
                if !(lo + w).is_finite() {
                    return f64::INFINITY;
                }
            }
            w
        };
        let mut lo_w = hi_w;
        loop {
            lo_w *= 0.5;
            if lo_w == 0.0 {
                break;
            }
            if at(lo_w) > s {
                break;
            }
            hi_w = lo_w;
        }
        for _ in 0..400 {
            let mid = if lo_w > 0.0 && hi_w / lo_w > 4.0 {
                (lo_w * hi_w).sqrt()
            } else {
                0.5 * (lo_w + hi_w)
            };
            if mid <= lo_w || mid >= hi_w || lo + mid == lo + hi_w {
                break;
            }
            if at(mid) > s {
                lo_w = mid;
            } else {
                hi_w = mid;
            }
        }
        lo + hi_w
    }

    /// Derivative at an interior point: closed form where available, central
    /// differences with relative step `FD_STEP` otherwise.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        if !self.domain.is_interior(t) {
            return Err(Error::Domain {
                value: t,
                domain: self.domain.to_string(),
            });
        }
        Ok(match &self.kind {
            Kind::PowerLaw { c, b } => -c * b * t.powf(-b - 1.0),
            Kind::LogPower { b, scale } => -b * (scale / t).ln().powf(b - 1.0) / t,
            Kind::ExpPower { alpha } => {
                -alpha * t.powf(-alpha - 1.0) * self.formula(t)
            }
            Kind::PsiEta { psi, k } => {
                let deta = if *k == 2 {
                    -1.0 / t
                } else {
                    -((*k - 2) as f64) * t.powf(1.0 - *k as f64)
                };
                psi.derivative(eta(*k, t)) * deta
            }
            Kind::Shifted { inner, shift } => inner.derivative(t - shift)?,
            Kind::Inverse(inner) => {
                let x = inner.inverse_value(t);
                1.0 / inner.derivative(x)?
            }
            Kind::Computed(Computed {
                derivative: Some(df),
                ..
            }) => df(t),
            _ => self.finite_difference(t),
        })
    }

    /// `ln f(t)`, exact for ExpPower far past the overflow of `f` itself.
    pub fn log_value(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::ExpPower { alpha } if self.domain.contains(t) => t.powf(-alpha),
            Kind::PowerLaw { c, b } if self.domain.contains(t) => c.ln() - b * t.ln(),
            _ => self.value(t).ln(),
        }
    }

    /// `f'(t) / f(t)` at an interior point.
    pub fn log_derivative(&self, t: f64) -> Result<f64> {
        match &self.kind {
            Kind::PowerLaw { b, .. } if self.domain.is_interior(t) => Ok(-b / t),
            Kind::ExpPower { alpha } if self.domain.is_interior(t) => Ok(-alpha * t.powf(-alpha - 1.0)),
            Kind::LogPower { b, scale } if self.domain.is_interior(t) => Ok(-b / (t * (scale / t).ln())),
            _ => Ok(self.derivative(t)? / self.formula(t)),
        }
    }

    /// `inf { t : ln f(t) <= l }`, i.e. `inverse_value(exp(l))` without
    /// overflowing for large `l`.
    pub fn inverse_log(&self, l: f64) -> f64 {
        let d = self.domain;
        let t = match &self.kind {
            Kind::PowerLaw { c, b } => ((c.ln() - l) / b).exp(),
            Kind::ExpPower { alpha } if l > 0.0 => l.powf(-1.0 / alpha),
            Kind::LogPower { b, scale } if l.is_finite() => scale * (-(l / b).exp()).exp(),
            _ => return self.inverse_value(l.exp()),
        };
        t.clamp(d.lo, d.hi)
    }

    fn finite_difference(&self, t: f64) -> f64 {
        let d = self.domain;
        let h = FD_STEP * t.abs().max(1e-300);
        let (l, r) = (t - h, t + h);
        if l > d.lo && r < d.hi {
            (self.formula(r) - self.formula(l)) / (2.0 * h)
        } else if r < d.hi {
            (self.formula(r) - self.formula(t)) / h
        } else {
            (self.formula(t) - self.formula(l)) / h
        }
    }

    /// Samples the function on a log grid of the domain and reports the
    /// first increase, if any.
    pub fn check_monotone(&self, samples: usize) -> Result<()> {
        let d = self.domain;
        let lo = if d.lo > 0.0 { d.lo } else { 1e-12 };
        let hi = if d.hi.is_finite() { d.hi } else { lo.max(1.0) * 1e6 };
        let mut prev = f64::INFINITY;
        for i in 0..samples {
            let t = lo * (hi / lo).powf((i as f64 + 0.5) / samples as f64);
            let v = self.value(t);
            if v > prev * (1.0 + 1e-12) {
                return Err(Error::InvalidProfile(format!(
                    "{} increases near t = {t:e}",
                    self.describe()
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

/// `eta_k(t)`: `t^(2-k)` for `k > 2`, `log(1/t)` for `k = 2`.
pub fn eta(k: u32, t: f64) -> f64 {
    if k == 2 {
        -t.ln()
    } else {
        t.powf(2.0 - k as f64)
    }
}

/// Radius where `eta_k` equals `s`; infinite for `s <= 0` when `k > 2`.
pub fn eta_inverse(k: u32, s: f64) -> f64 {
    if k == 2 {
        (-s).exp()
    } else if s <= 0.0 {
        f64::INFINITY
    } else {
        s.powf(-1.0 / (k as f64 - 2.0))
    }
}

/// The fundamental-solution profile as a decreasing function: on `(0, inf)`
/// for `k > 2` and on `(0, 1)` for `k = 2`.
pub fn fundamental_eta(k: u32) -> Result<DecreasingFn> {
    if k < 2 {
        return Err(Error::Argument(format!("dimension k must be >= 2, got {k}")));
    }
    DecreasingFn::psi_eta(ConcaveFn::identity(), k)
}

/// Volume of the unit ball in R^k.
pub fn unit_ball_volume(k: u32) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / k as f64 * unit_ball_volume(k - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn closed_form_values() {
        let f = DecreasingFn::power_law(1.0, 2.0).unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 4.0);
        let f = DecreasingFn::exp_power(1.0).unwrap();
        assert!(close(f.eval(1.0).unwrap(), std::f64::consts::E, 1e-15));
        assert!(f.eval(0.0).is_err());
        assert!(f.eval(1e-3).unwrap().is_infinite());
    }

    #[test]
    fn eta_profiles() {
        assert_eq!(fundamental_eta(3).unwrap().eval(0.5).unwrap(), 2.0);
        assert!(close(
            fundamental_eta(2).unwrap().eval((-1f64).exp()).unwrap(),
            1.0,
            1e-15
        ));
        assert!(close(fundamental_eta(4).unwrap().eval(0.1).unwrap(), 100.0, 1e-13));
        assert!(fundamental_eta(1).is_err());
        let e2 = fundamental_eta(2).unwrap();
        assert_eq!(e2.domain().hi, 1.0);
        assert!(e2.eval(1.0).is_err());
    }

    #[test]
    fn power_law_inverse() {
        let f = DecreasingFn::power_law(1.0, 2.0).unwrap();
        let inv = f.gen_inverse();
        assert!(close(inv.eval(4.0).unwrap(), 0.5, 1e-15));
        assert!(f.value(inv.value(4.0)) <= 4.0);
    }

    #[test]
    fn step_inverse_uses_left_end() {
        let t = Table::new(vec![[0.5, 4.0], [1.0, 4.0], [1.0, 2.0], [2.0, 2.0], [3.0, 1.0]]).unwrap();
        let f = DecreasingFn::tabulated(t).unwrap();
        assert_eq!(f.inverse_value(2.0), 1.0);
        assert_eq!(f.right_regularize().value(1.0), 2.0);
        assert_eq!(f.value(1.0), 4.0);
    }

    #[test]
    fn derivatives() {
        let f = DecreasingFn::power_law(1.0, 1.0).unwrap();
        assert!(close(f.derivative(2.0).unwrap(), -0.25, 1e-15));
        let f = DecreasingFn::log_power(1.0, 1.0).unwrap();
        assert!(close(f.derivative(0.25).unwrap(), -4.0, 1e-14));
        assert!(f.derivative(0.5).is_err());
        let f = DecreasingFn::log_power(1.0, 2.0).unwrap();
        assert!(close(f.derivative(0.5).unwrap(), -2.0, 1e-14));
    }

    #[test]
    fn log_power_domain_is_clipped() {
        let f = DecreasingFn::log_power(2.0, 1.0).unwrap();
        let hi = f.domain().hi;
        assert!(close(f.eval(hi).unwrap(), 1.0, 1e-14));
        assert!(f.eval(0.5).is_err());
    }

    #[test]
    fn psi_eta_with_sum_profile_inverts_by_bisection() {
        let psi = ConcaveFn::Sum {
            terms: vec![ConcaveFn::identity(), ConcaveFn::Log1p { coef: 1.0 }],
        };
        let g = DecreasingFn::psi_eta(psi, 3).unwrap();
        for s in [0.5, 3.0, 100.0, 1e6] {
            let t = g.inverse_value(s);
            assert!(g.value(t) <= s);
            assert!(close(g.value(t), s, 1e-12));
        }
    }

    #[test]
    fn shifted_and_computed() {
        let f = DecreasingFn::power_law(1.0, 1.0).unwrap().shifted(2.0);
        assert_eq!(f.domain().lo, 2.0);
        assert!(close(f.eval(3.0).unwrap(), 1.0, 1e-15));
        assert!(close(f.inverse_value(0.5), 4.0, 1e-14));
        let c = DecreasingFn::computed("recip", Interval::open(0.0, f64::INFINITY), |t| {
            if t <= 0.0 {
                f64::INFINITY
            } else {
                1.0 / t
            }
        })
        .unwrap();
        assert!(close(c.inverse_value(0.25), 4.0, 1e-13));
        assert!(c.upper_limit().is_infinite());
        assert!(c.lower_limit() < 1e-299);
    }

    #[test]
    fn spec_round_trip() {
        let spec = FnSpec::PsiEta {
            psi: ConcaveFn::Power {
                theta: 0.5,
                coef: 1.0,
            },
            k: 3,
            domain: None,
        };
        let f = DecreasingFn::from_spec(&spec, None).unwrap();
        assert_eq!(f.spec().unwrap(), spec);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"family\":\"psi_eta\""));
        let back: FnSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn unit_ball_volumes() {
        assert!(close(unit_ball_volume(2), std::f64::consts::PI, 1e-15));
        assert!(close(unit_ball_volume(3), 4.0 * std::f64::consts::PI / 3.0, 1e-15));
    }
}
