//! Config files for the single-purpose commands. Scenario and comparison
//! configs live in the library.

use std::path::{Path, PathBuf};

use growthbound::geometry::{ChartParams, Region, Set, SetDescr};
use growthbound::harness::{AdmissibilitySpec, SCHEMA_VERSION};
use growthbound::monotone::{DecreasingFn, FnSpec};
use growthbound::perron::Schedule;
use growthbound::selfimprove::Method;
use growthbound::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

fn cfg(field: &str, msg: impl Into<String>) -> Error {
    Error::config(field, msg)
}

/// Parses `text`, naming the offending field on failure.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let field = if path == "." { String::new() } else { path };
        cfg(&field, format!("{inner}"))
    })
}

pub struct Loaded<T> {
    pub config: T,
    pub dir: PathBuf,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| cfg("--config", format!("{}: {e}", path.display())))?;
    Ok(Loaded {
        config: parse(&text)?,
        dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(cfg(
            "schema_version",
            format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

fn build_g(spec: &FnSpec, dir: &Path) -> Result<DecreasingFn> {
    DecreasingFn::from_spec(spec, Some(dir)).map_err(|e| cfg("g", e.to_string()))
}

fn build_set(field: &str, d: &SetDescr) -> Result<Set> {
    d.build().map_err(|e| cfg(field, e.to_string()))
}

fn e() -> f64 {
    std::f64::consts::E
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImproveConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub k: u32,
    pub g: FnSpec,
    pub alpha: f64,
    #[serde(default = "e")]
    pub a: f64,
    pub methods: Vec<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartParams>,
    #[serde(default = "one")]
    pub convexity_beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissibility: Option<AdmissibilitySpec>,
    /// Set used to estimate the admissibility constant when none is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_set: Option<SetDescr>,
    /// `dist(A, boundary)`; the admissible bounds hold for `d` below half of it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_a_boundary: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    200
}

pub struct ImproveParts {
    pub g: DecreasingFn,
    pub set: Option<Set>,
}

impl ImproveConfig {
    pub fn build(&self, dir: &Path) -> Result<ImproveParts> {
        check_version(self.schema_version)?;
        if !(self.k == 2 || self.k == 3) {
            return Err(cfg("k", "must be 2 or 3"));
        }
        let g = build_g(&self.g, dir)?;
        if !(self.alpha > 0.0 && self.alpha <= g.domain().hi) {
            return Err(cfg("alpha", format!("must lie in (0, {}]", g.domain().hi)));
        }
        if !(self.a > 1.0) {
            return Err(cfg("a", "must exceed 1"));
        }
        if self.methods.is_empty() {
            return Err(cfg("methods", "no method requested"));
        }
        if self.points < 2 {
            return Err(cfg("points", "need at least 2"));
        }
        let lip = self
            .methods
            .iter()
            .any(|m| matches!(m, Method::LipschitzTwoTerm | Method::ConvexityUpgraded));
        if lip {
            let Some(p) = &self.chart else {
                return Err(cfg("chart", "required by the Lipschitz methods"));
            };
            p.validate(self.alpha).map_err(|e| cfg("chart", e.to_string()))?;
        }
        if !(self.convexity_beta > 0.0) {
            return Err(cfg("convexity_beta", "must be positive"));
        }
        let mut set = None;
        if self
            .methods
            .iter()
            .any(|m| matches!(m, Method::AdmissibleRho | Method::PowerTypeClosed))
        {
            let Some(adm) = &self.admissibility else {
                return Err(cfg("admissibility", "required by the admissible methods"));
            };
            if !(adm.p_star > 0.0 && adm.p_star < self.k as f64) {
                return Err(cfg("admissibility.p_star", format!("must lie in (0, {})", self.k)));
            }
            if adm.c.is_some_and(|c| !(c > 0.0)) {
                return Err(cfg("admissibility.c", "must be positive"));
            }
            if adm.c.is_none() {
                let Some(d) = &self.a_set else {
                    return Err(cfg("a_set", "needed to estimate the admissibility constant"));
                };
                let s = build_set("a_set", d)?;
                if s.dim() != self.k as usize {
                    return Err(cfg("a_set", format!("set lives in R^{}", s.dim())));
                }
                set = Some(s);
            }
            if !self.dist_a_boundary.is_some_and(|d| d > 0.0 && d.is_finite()) {
                return Err(cfg("dist_a_boundary", "a positive distance is required"));
            }
        }
        Ok(ImproveParts { g, set })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomarConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub omega: Region,
    pub a_set: SetDescr,
    pub g: FnSpec,
    #[serde(default = "e")]
    pub a: f64,
    pub eps: f64,
    /// Further eps values; each adds a Theorem A column to the sweep table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps_sweep: Vec<f64>,
    #[serde(default = "one_u32")]
    pub lambda: u32,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Values of `F = g(dist(x, A))` are capped here when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    /// Also evaluate the bound through `mu`; needs an admissible `A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem_b: Option<AdmissibilitySpec>,
    #[serde(default = "default_ray")]
    pub points: usize,
    /// Smallest boundary distance, relative to the region scale.
    #[serde(default = "default_d_min")]
    pub d_min: f64,
}

fn default_samples() -> usize {
    200_000
}

fn default_ray() -> usize {
    64
}

fn default_d_min() -> f64 {
    1e-4
}

pub struct DomarParts {
    pub g: DecreasingFn,
    pub set: Set,
}

impl DomarConfig {
    pub fn build(&self, dir: &Path) -> Result<DomarParts> {
        check_version(self.schema_version)?;
        self.omega.validate().map_err(|e| cfg("omega", e.to_string()))?;
        let k = self.omega.dim();
        if !(k == 2 || k == 3) {
            return Err(cfg("omega", format!("dimension must be 2 or 3, got {k}")));
        }
        let set = build_set("a_set", &self.a_set)?;
        if set.dim() != k {
            return Err(cfg("a_set", format!("set lives in R^{}, region in R^{k}", set.dim())));
        }
        let g = build_g(&self.g, dir)?;
        if !(self.a > 1.0) {
            return Err(cfg("a", "must exceed 1"));
        }
        if !(self.eps > 0.0) {
            return Err(cfg("eps", "must be positive"));
        }
        if let Some(i) = self.eps_sweep.iter().position(|e| !(*e > 0.0)) {
            return Err(cfg(&format!("eps_sweep[{i}]"), "must be positive"));
        }
        if self.lambda == 0 {
            return Err(cfg("lambda", "must be at least 1"));
        }
        if self.samples < 10_000 {
            return Err(cfg("samples", "need at least 1e4 samples"));
        }
        if self.cap.is_some_and(|c| !(c > 1.0)) {
            return Err(cfg("cap", "must exceed 1"));
        }
        if let Some(adm) = &self.theorem_b {
            if !(adm.p_star > 0.0 && adm.p_star < k as f64) {
                return Err(cfg("theorem_b.p_star", format!("must lie in (0, {k})")));
            }
            if adm.c.is_some_and(|c| !(c > 0.0)) {
                return Err(cfg("theorem_b.c", "must be positive"));
            }
        }
        if self.points < 2 {
            return Err(cfg("points", "need at least 2"));
        }
        if !(self.d_min > 0.0 && self.d_min < 0.5) {
            return Err(cfg("d_min", "must lie in (0, 0.5)"));
        }
        Ok(DomarParts { g, set })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerronConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub omega: Region,
    pub a_set: SetDescr,
    pub g: FnSpec,
    pub grid: usize,
    /// Obstacle cap; `g(h)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    /// Stopping tolerance relative to the cap.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub schedule: Schedule,
    /// Solve again with the other schedule and report the largest difference.
    #[serde(default = "yes")]
    pub cross_check: bool,
}

fn default_tol() -> f64 {
    1e-8
}

fn yes() -> bool {
    true
}

pub struct PerronParts {
    pub g: DecreasingFn,
    pub set: Set,
}

impl PerronConfig {
    pub fn build(&self, dir: &Path) -> Result<PerronParts> {
        check_version(self.schema_version)?;
        self.omega.validate().map_err(|e| cfg("omega", e.to_string()))?;
        let set = build_set("a_set", &self.a_set)?;
        if set.dim() != self.omega.dim() {
            return Err(cfg("a_set", "dimension differs from the region"));
        }
        let g = build_g(&self.g, dir)?;
        if !(3..=1025).contains(&self.grid) {
            return Err(cfg("grid", "must lie in [3, 1025]"));
        }
        if self.cap.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
            return Err(cfg("cap", "must be positive and finite"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(cfg("tol", "must lie in (0, 1)"));
        }
        Ok(PerronParts { g, set })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibilityConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub set: SetDescr,
    pub p_star: f64,
    #[serde(default = "default_tube_samples")]
    pub samples: usize,
    #[serde(default = "yes")]
    pub assouad: bool,
    #[serde(default = "default_centers")]
    pub max_centers: usize,
}

fn default_tube_samples() -> usize {
    20_000
}

fn default_centers() -> usize {
    16
}

impl AdmissibilityConfig {
    pub fn build(&self) -> Result<Set> {
        check_version(self.schema_version)?;
        let set = build_set("set", &self.set)?;
        let k = set.dim() as f64;
        if !(self.p_star > 0.0 && self.p_star < k) {
            return Err(cfg("p_star", format!("must lie in (0, {k})")));
        }
        if self.samples < 100 {
            return Err(cfg("samples", "need at least 100 samples per probe"));
        }
        Ok(set)
    }
}
