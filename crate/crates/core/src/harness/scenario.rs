use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::FloorTable;
use crate::domar::{inradius, mu_q_estimate, AnalyticMu, MuSource, TheoremA, TheoremB};
use crate::error::{Error, Result};
use crate::geometry::{
    admissibility_constant, curve_views, default_anchors, lipschitz_chart_check, log_space, AdmissibilityEstimate,
    ChartParams, ChartReport, ProbeSchedule, Region, Set, SetDescr,
};
use crate::measure::{distribution_function, f1_transform, Majorant};
use crate::monotone::{DecreasingFn, FnSpec};
use crate::perron::{
    discrete_subharmonic_check, discretization_allowance, largest_subharmonic_minorant, margin_summary, Grid,
    MarginReport, NodeClass, Obstacle, PerronOptions, PerronResult, Schedule, SubharmonicReport,
    ALLOWANCE_FORMULA,
};
use crate::rng::derive_seed;
use crate::selfimprove::{
    admissible_improve, convexity_upgrade, lipschitz_improve, power_type_bound, ImprovedBound, Method,
};

use super::barrier::{barrier_check, BarrierReport};
use super::checks::test_function_subharmonic;
use super::testfn::{calibrate_kernel, Calibration, TestFunction};

pub const SCHEMA_VERSION: u32 = 1;

/// How the test function of a scenario is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFnSpec {
    /// Kernel sum with poles at the points of `B`; the common weight is
    /// calibrated against `g` unless given.
    KernelSum {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<f64>,
        #[serde(default = "default_budget")]
        samples: usize,
    },
    LogModulus {
        #[serde(default)]
        zeros: Vec<[f64; 2]>,
        poles: Vec<[f64; 2]>,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn default_budget() -> usize {
    200_000
}

fn one() -> f64 {
    1.0
}

fn default_a() -> f64 {
    std::f64::consts::E
}

fn default_adm_samples() -> usize {
    20_000
}

fn default_barrier_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibilitySpec {
    pub p_star: f64,
    /// Known constant; estimated by tube sampling when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default = "default_adm_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomarSpec {
    pub eps: f64,
    #[serde(default = "default_lambda")]
    pub lambda: u32,
    #[serde(default)]
    pub theorem_b: bool,
    #[serde(default = "default_dist_samples")]
    pub samples: usize,
}

fn default_lambda() -> u32 {
    1
}

fn default_dist_samples() -> usize {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSpec {
    /// Radii `r = R / (m L)` for each listed `m`.
    pub divisors: Vec<f64>,
    #[serde(default = "default_barrier_samples")]
    pub samples: usize,
    #[serde(default = "one_usize")]
    pub anchors: usize,
}

fn one_usize() -> usize {
    1
}

/// Planted faults; each one yields an assertion that is expected to fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Control {
    /// Multiply the bound of `method` by `factor` in the comparisons.
    ScaleBound { method: Method, factor: f64 },
    /// Multiply the validity radius of `method` by `factor`.
    InflateTau { method: Method, factor: f64 },
    /// Multiply the test function by `factor` in the hypothesis check.
    ScaleU { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Pass,
    /// Only the planted controls fail.
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub omega: Region,
    pub a_set: SetDescr,
    pub b_set: SetDescr,
    pub g: FnSpec,
    /// Hypothesis radius: `u <= g(dist(x, A u B))` where `0 < dist < alpha`.
    pub alpha: f64,
    pub u: TestFnSpec,
    /// Nodes along the longest side of the bounding box.
    pub grid: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissibility: Option<AdmissibilitySpec>,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default = "one")]
    pub convexity_beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domar: Option<DomarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierSpec>,
    /// Obstacle value outside the hypothesis zone in units of the cap;
    /// `g(alpha)` (capped) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outside_factor: Option<f64>,
    #[serde(default)]
    pub controls: Vec<Control>,
    #[serde(default)]
    pub expect: Expect,
}

/// Overrides applied on top of a scenario.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RunOptions {
    pub grid: Option<usize>,
    /// Minorant tolerance in units of the cap (default `1e-8`).
    pub tol: Option<f64>,
    pub skip_perron: bool,
    /// Also solve with the Jacobi schedule and compare.
    pub cross_schedule: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub expected: bool,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

impl Assertion {
    pub fn as_expected(&self) -> bool {
        self.expected == self.passed
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundSummary {
    pub method: Method,
    pub record: serde_json::Value,
    pub conclusion: MarginReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perron: Option<MarginReport>,
    /// `exp` of the smallest conclusion margin, for log-modulus functions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modulus_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DomarSummary {
    pub perron: PerronResult,
    pub d: f64,
    pub theorem_a: MarginReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem_b: Option<MarginReport>,
}

/// Smallest margin in a distance bin.
#[derive(Debug, Clone, Serialize)]
pub struct MarginRow {
    pub source: String,
    pub d_lo: f64,
    pub d_hi: f64,
    pub count: usize,
    pub min_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub u_kind: String,
    pub grid_n: usize,
    pub hgrid: f64,
    pub cap: f64,
    pub allowance: f64,
    pub allowance_formula: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    pub hypothesis: MarginReport,
    pub subharmonic: SubharmonicReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartReport>,
    pub bounds: Vec<BoundSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perron: Option<PerronResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domar: Option<DomarSummary>,
    pub barrier: Vec<BarrierReport>,
    pub notes: Vec<String>,
    pub tables: Vec<MarginRow>,
    /// Smallest `g^-(u(x)) / dist(x, B)` per distance bin; no assertion.
    pub probe: Vec<MarginRow>,
    pub assertions: Vec<Assertion>,
}

impl Report {
    /// Every assertion came out as expected.
    pub fn ok(&self) -> bool {
        self.assertions.iter().all(|a| a.as_expected())
    }

    pub fn unexpected(&self) -> Vec<&Assertion> {
        self.assertions.iter().filter(|a| !a.as_expected()).collect()
    }

    pub fn summary_text(&self) -> String {
        let mut s = format!(
            "scenario {} (seed {}, grid {}, h = {:.4e}, cap = {:.4e}, allowance = {:.4e})\n",
            self.scenario, self.seed, self.grid_n, self.hgrid, self.cap, self.allowance
        );
        for a in &self.assertions {
            let tag = match (a.passed, a.as_expected()) {
                (true, true) => "pass",
                (false, true) => "flagged (planted)",
                (true, false) => "UNFLAGGED",
                (false, false) => "FAIL",
            };
            s.push_str(&format!("  [{tag}] {}: {}", a.name, a.detail));
            if let Some(w) = &a.witness {
                if !a.passed {
                    s.push_str(&format!(" at {w:?}"));
                }
            }
            s.push('\n');
        }
        for n in &self.notes {
            s.push_str(&format!("  note: {n}\n"));
        }
        s
    }

    /// Margin table `(source, d_lo, d_hi, count, min_margin)`.
    pub fn write_margin_csv(&self, path: &Path, header: &str) -> Result<()> {
        write_rows(&self.tables, path, header, "min_margin")
    }

    /// Probe rows: smallest `g^-(u) / dist(x, B)` per distance bin.
    pub fn write_probe_csv(&self, path: &Path, header: &str) -> Result<()> {
        write_rows(&self.probe, path, header, "min_v")
    }
}

fn write_rows(rows: &[MarginRow], path: &Path, header: &str, value: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{header}")?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["source", "d_lo", "d_hi", "count", value])?;
    for r in rows {
        w.write_record([
            r.source.clone(),
            format!("{:.12e}", r.d_lo),
            format!("{:.12e}", r.d_hi),
            r.count.to_string(),
            format!("{:.12e}", r.min_margin),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Built scenario objects.
struct Parts {
    k: usize,
    a: Set,
    b: Set,
    g: DecreasingFn,
}

fn cfg(field: &str, msg: impl Into<String>) -> Error {
    Error::config(field, msg)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| cfg(&format!("line {} column {}", e.line(), e.column()), e.to_string()))
    }

    /// Structural checks; every failure is a config error naming the field.
    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    fn build(&self) -> Result<Parts> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(cfg(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        self.omega.validate().map_err(|e| cfg("omega", e.to_string()))?;
        let k = self.omega.dim();
        if !(k == 2 || k == 3) {
            return Err(cfg("omega", format!("dimension must be 2 or 3, got {k}")));
        }
        let a = self.a_set.build().map_err(|e| cfg("a_set", e.to_string()))?;
        let b = self.b_set.build().map_err(|e| cfg("b_set", e.to_string()))?;
        if a.dim() != k {
            return Err(cfg("a_set", format!("set lives in R^{}, region in R^{k}", a.dim())));
        }
        if b.dim() != k {
            return Err(cfg("b_set", format!("set lives in R^{}, region in R^{k}", b.dim())));
        }
        let g = DecreasingFn::from_spec(&self.g, None).map_err(|e| cfg("g", e.to_string()))?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(cfg("alpha", "must be positive"));
        }
        if self.alpha > g.domain().hi {
            return Err(cfg("alpha", format!("exceeds the domain of g ({})", g.domain())));
        }
        if !(3..=1025).contains(&self.grid) {
            return Err(cfg("grid", "must lie in [3, 1025]"));
        }
        if !(self.a > 1.0) {
            return Err(cfg("a", "must exceed 1"));
        }
        let scale = self.omega.scale();
        if !a.sample(scale / 64.0).iter().all(|x| self.omega.contains(x)) {
            return Err(cfg("a_set", "A must lie inside omega"));
        }
        if !b.sample(scale / 64.0).iter().any(|x| self.omega.contains(x)) {
            return Err(cfg("b_set", "B must meet omega"));
        }
        match &self.u {
            TestFnSpec::KernelSum { weight, samples } => {
                if !matches!(self.b_set, SetDescr::PointCloud { .. }) {
                    return Err(cfg("u", "kernel sums need B to be a point cloud"));
                }
                if weight.is_some_and(|w| !(w > 0.0)) {
                    return Err(cfg("u.weight", "must be positive"));
                }
                if *samples < 1000 {
                    return Err(cfg("u.samples", "need at least 1000 samples"));
                }
            }
            TestFnSpec::LogModulus { poles, scale, .. } => {
                if k != 2 {
                    return Err(cfg("u", "log-modulus functions live in the plane"));
                }
                if !(*scale > 0.0) {
                    return Err(cfg("u.scale", "must be positive"));
                }
                for p in poles {
                    if b.dist(p) > 1e-9 {
                        return Err(cfg("u.poles", format!("pole {p:?} is not in B")));
                    }
                }
            }
        }
        let needs_chart = self
            .methods
            .iter()
            .any(|m| matches!(m, Method::LipschitzTwoTerm | Method::ConvexityUpgraded))
            || self.barrier.is_some();
        if needs_chart {
            let Some(p) = &self.chart else {
                return Err(cfg("chart", "required by the Lipschitz methods and barrier checks"));
            };
            p.validate(self.alpha).map_err(|e| cfg("chart", e.to_string()))?;
        }
        if self.methods.contains(&Method::ConvexityUpgraded) && !self.methods.contains(&Method::LipschitzTwoTerm) {
            return Err(cfg("methods", "convexity_upgraded needs lipschitz_two_term"));
        }
        if self.methods.contains(&Method::PowerTypeClosed) && !self.methods.contains(&Method::AdmissibleRho) {
            return Err(cfg("methods", "power_type_closed needs admissible_rho"));
        }
        let needs_adm = self.methods.contains(&Method::AdmissibleRho)
            || self.domar.as_ref().is_some_and(|d| d.theorem_b);
        if needs_adm {
            let Some(adm) = &self.admissibility else {
                return Err(cfg("admissibility", "required by admissible_rho and theorem_b"));
            };
            if !(adm.p_star > 0.0 && adm.p_star < k as f64) {
                return Err(cfg("admissibility.p_star", format!("must lie in (0, {k})")));
            }
            if adm.c.is_some_and(|c| !(c > 0.0)) {
                return Err(cfg("admissibility.c", "must be positive"));
            }
        }
        if !(self.convexity_beta > 0.0) {
            return Err(cfg("convexity_beta", "must be positive"));
        }
        if let Some(d) = &self.domar {
            if !(d.eps > 0.0) {
                return Err(cfg("domar.eps", "must be positive"));
            }
            if d.lambda == 0 {
                return Err(cfg("domar.lambda", "must be at least 1"));
            }
            if d.samples < 10_000 {
                return Err(cfg("domar.samples", "need at least 1e4 samples"));
            }
        }
        if let Some(bs) = &self.barrier {
            if bs.divisors.is_empty() || bs.divisors.iter().any(|m| !(*m > 8.0)) {
                return Err(cfg("barrier.divisors", "each divisor must exceed 8"));
            }
        }
        if self.outside_factor.is_some_and(|f| !(f > 0.0)) {
            return Err(cfg("outside_factor", "must be positive"));
        }
        for (i, c) in self.controls.iter().enumerate() {
            let (m, f) = match c {
                Control::ScaleBound { method, factor } | Control::InflateTau { method, factor } => {
                    (Some(method), *factor)
                }
                Control::ScaleU { factor } => (None, *factor),
            };
            if !(f > 0.0) {
                return Err(cfg(&format!("controls[{i}].factor"), "must be positive"));
            }
            if let Some(m) = m {
                if !self.methods.contains(m) {
                    return Err(cfg(&format!("controls[{i}].method"), "method is not run"));
                }
            }
        }
        if self.expect == Expect::Flagged && self.controls.is_empty() {
            return Err(cfg("expect", "a flagged scenario needs planted controls"));
        }
        Ok(Parts { k, a, b, g })
    }
}

struct Ctx<'a> {
    grid: &'a Grid,
    d_a: Vec<f64>,
    d_b: Vec<f64>,
    d_bd: Vec<f64>,
    u: Vec<f64>,
}

fn margins_over<B>(ctx: &Ctx, values: &[f64], bound: B) -> Vec<(usize, f64)>
where
    B: Fn(usize) -> Option<f64> + Sync,
{
    (0..ctx.grid.len())
        .into_par_iter()
        .filter(|&i| ctx.grid.class(i) != NodeClass::Ghost)
        .filter_map(|i| bound(i).map(|b| (i, b - values[i])))
        .collect()
}

const BINS: usize = 12;

/// Margins of exact functions are compared up to rounding.
const ROUNDING: f64 = 1e-12;

fn table_rows(source: &str, margins: &[(usize, f64)], dist: &[f64], d_lo: f64, d_hi: f64) -> Vec<MarginRow> {
    if !(d_hi > d_lo) {
        return Vec::new();
    }
    let edges = log_space(d_lo, d_hi, BINS + 1);
    let mut rows: Vec<MarginRow> = edges
        .windows(2)
        .map(|w| MarginRow {
            source: source.to_string(),
            d_lo: w[0],
            d_hi: w[1],
            count: 0,
            min_margin: f64::INFINITY,
        })
        .collect();
    for &(i, m) in margins {
        let d = dist[i];
        let j = edges.partition_point(|&e| e <= d);
        let j = j.clamp(1, BINS) - 1;
        rows[j].count += 1;
        rows[j].min_margin = rows[j].min_margin.min(m);
    }
    rows
}

fn assertion(name: &str, expected: bool, r: &MarginReport) -> Assertion {
    Assertion {
        name: name.to_string(),
        expected,
        passed: r.passed(),
        detail: format!(
            "{} nodes, min margin {:.6e}, {} violations beyond {:.4e}",
            r.checked, r.min_margin, r.violations, r.allowance
        ),
        witness: r.witness.clone(),
    }
}

/// Runs one scenario: test function and hypothesis, improved bounds and
/// their conclusions, the minorant oracle against every bound, the
/// boundary-distance bounds, and the barrier lemma.
pub fn run_scenario(s: &Scenario, seed: u64, opts: &RunOptions) -> Result<Report> {
    run_inner(s, seed, opts).map_err(|e| match e {
        Error::Config { .. } => e,
        other => other.in_scenario(&s.name),
    })
}

fn run_inner(s: &Scenario, seed: u64, opts: &RunOptions) -> Result<Report> {
    let Parts { k, a, b, g } = s.build()?;
    let n = opts.grid.unwrap_or(s.grid);
    let grid = Grid::new(&s.omega, n)?;
    let hgrid = grid.h;
    let cap = g.value(hgrid);
    if !(cap.is_finite() && cap > 0.0) {
        return Err(Error::Argument(format!("g(h) = {cap} is not a usable cap")));
    }
    let allowance = discretization_allowance(hgrid, cap);
    let mut notes = Vec::new();
    let mut assertions = Vec::new();
    let mut tables = Vec::new();

    let pts: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let d_a: Vec<f64> = pts.par_iter().map(|x| a.dist(x)).collect();
    let d_b: Vec<f64> = pts.par_iter().map(|x| b.dist(x)).collect();
    let d_bd: Vec<f64> = pts
        .par_iter()
        .map(|x| s.omega.boundary_dist(x).unwrap_or(0.0))
        .collect();

    // Test function.
    let mut calibration = None;
    let u = match &s.u {
        TestFnSpec::KernelSum { weight, samples } => {
            let poles = b.sample(f64::INFINITY);
            match weight {
                Some(w) => TestFunction::kernel_sum(k as u32, &poles, *w),
                None => {
                    let extra: Vec<Vec<f64>> = (0..grid.len())
                        .filter(|&i| grid.class(i) != NodeClass::Ghost && d_b[i] > 0.0 && d_b[i] < s.alpha)
                        .map(|i| pts[i].clone())
                        .collect();
                    let c = calibrate_kernel(&poles, &g, s.alpha, k as u32, *samples, &extra, derive_seed(seed, 1))?;
                    let f = c.function.clone();
                    calibration = Some(c);
                    f
                }
            }
        }
        TestFnSpec::LogModulus { zeros, poles, scale } => TestFunction::LogModulus {
            zeros: zeros.clone(),
            poles: poles.clone(),
            scale: *scale,
        },
    };
    u.validate()?;
    let u_vals: Vec<f64> = pts.par_iter().enumerate().map(|(i, x)| u.eval_node(i, x)).collect();
    let ctx = Ctx {
        grid: &grid,
        d_a,
        d_b,
        d_bd,
        u: u_vals,
    };
    let d_ab = |i: usize| ctx.d_a[i].min(ctx.d_b[i]);

    // Hypothesis.
    let hyp_m = margins_over(&ctx, &ctx.u, |i| {
        let d = d_ab(i);
        (d > 0.0 && d < s.alpha).then(|| g.value(d))
    });
    let hypothesis = margin_summary(&hyp_m, &grid, ROUNDING * cap);
    assertions.push(assertion("hypothesis", true, &hypothesis));
    for c in &s.controls {
        if let Control::ScaleU { factor } = c {
            let scaled: Vec<f64> = ctx.u.iter().map(|v| match &u {
                TestFunction::LogModulus { .. } => v + factor.ln(),
                _ => v * factor,
            })
            .collect();
            let m = margins_over(&ctx, &scaled, |i| {
                let d = d_ab(i);
                (d > 0.0 && d < s.alpha).then(|| g.value(d))
            });
            let r = margin_summary(&m, &grid, ROUNDING * cap);
            assertions.push(assertion(&format!("control: hypothesis with u x {factor}"), false, &r));
        }
    }
    // Exploratory: largest v with u <= g(v dist(x, B)), binned by distance.
    let v_ratio: Vec<(usize, f64)> = (0..grid.len())
        .into_par_iter()
        .filter(|&i| grid.class(i) != NodeClass::Ghost && ctx.d_b[i] > 0.0 && ctx.d_b[i] < s.alpha)
        .filter_map(|i| {
            let v = g.inverse_value(ctx.u[i]) / ctx.d_b[i];
            v.is_finite().then_some((i, v))
        })
        .collect();
    let probe = table_rows("probe/v_ratio", &v_ratio, &ctx.d_b, hgrid / 2.0, s.alpha);
    let subharmonic = test_function_subharmonic(&u, &grid);
    assertions.push(Assertion {
        name: "u sub-mean".into(),
        expected: true,
        passed: subharmonic.passed(),
        detail: format!(
            "{} nodes, largest excess {:.4e}",
            subharmonic.checked, subharmonic.max_excess
        ),
        witness: subharmonic.violations.first().map(|v| v.point.clone()),
    });

    // Improved bounds.
    let mut bounds: Vec<ImprovedBound> = Vec::new();
    let mut chart = None;
    if s.methods.contains(&Method::LipschitzTwoTerm) {
        let params = s.chart.expect("validated");
        match lipschitz_chart_check(&a, &params, None) {
            Ok(rep) => {
                assertions.push(Assertion {
                    name: "chart".into(),
                    expected: true,
                    passed: true,
                    detail: format!(
                        "{} anchors, max slope {:.4}, sandwich excess {:.3e} / {:.3e}",
                        rep.anchors_checked, rep.max_slope, rep.lower_excess, rep.upper_excess
                    ),
                    witness: None,
                });
                chart = Some(rep);
                let lip = lipschitz_improve(&g, k as u32, &params, s.alpha)?;
                if s.methods.contains(&Method::ConvexityUpgraded) {
                    match convexity_upgrade(&g, &lip, s.convexity_beta) {
                        Ok(h) => bounds.push(h),
                        Err(Error::UpgradeUnavailable(m)) => notes.push(format!("convexity upgrade unavailable: {m}")),
                        Err(e) => return Err(e),
                    }
                }
                bounds.insert(0, lip);
            }
            Err(Error::ChartViolation { anchor, detail }) => assertions.push(Assertion {
                name: "chart".into(),
                expected: true,
                passed: false,
                detail,
                witness: Some(anchor),
            }),
            Err(e) => return Err(e),
        }
    }
    let adm = match &s.admissibility {
        Some(spec) => Some(admissibility(&a, spec, k, derive_seed(seed, 2))?),
        None => None,
    };
    if s.methods.contains(&Method::AdmissibleRho) {
        let adm = adm.as_ref().expect("validated");
        let dist_a_boundary = a
            .sample(hgrid / 4.0)
            .iter()
            .map(|x| s.omega.boundary_dist(x))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let (h, rho) = admissible_improve(&g, adm, s.a, dist_a_boundary)?;
        let tau = h.tau;
        bounds.push(h);
        if s.methods.contains(&Method::PowerTypeClosed) {
            match power_type_bound(&rho, tau) {
                Ok(h) => bounds.push(h),
                Err(Error::LimitDiverges(m)) => notes.push(format!("power-type bound unavailable: {m}")),
                Err(e) => return Err(e),
            }
        }
    }

    // Conclusions on u.
    let mut summaries = Vec::new();
    let tables_lo = hgrid / 2.0;
    let evaluators: Vec<Evaluator> = bounds.iter().map(|h| Evaluator::new(h, tables_lo)).collect();
    for (h, ev) in bounds.iter().zip(&evaluators) {
        let m = margins_over(&ctx, &ctx.u, |i| {
            let d = ctx.d_b[i];
            (d > 0.0 && d < h.tau).then(|| ev.eval(h, d))
        });
        let conclusion = margin_summary(&m, &grid, 1e-9 * cap);
        assertions.push(assertion(&format!("conclusion {}", h.method.slug()), true, &conclusion));
        tables.extend(table_rows(&format!("u/{}", h.method.slug()), &m, &ctx.d_b, tables_lo, h.tau));
        let modulus_ratio = matches!(u, TestFunction::LogModulus { .. }).then(|| conclusion.min_margin.exp());
        if let Some(r) = modulus_ratio {
            assertions.push(Assertion {
                name: format!("modulus bound {}", h.method.slug()),
                expected: true,
                passed: r >= 1.0 - 1e-9,
                detail: format!("min of C1 dist^-b / |f| over the grid = {r:.6e}"),
                witness: conclusion.witness.clone(),
            });
        }
        summaries.push(BoundSummary {
            method: h.method,
            record: h.record(),
            conclusion,
            perron: None,
            modulus_ratio,
        });
    }

    // Minorant oracle.
    let mut perron = None;
    let mut domar = None;
    let tol_rel = opts.tol.unwrap_or(1e-8);
    if !opts.skip_perron {
        let outside = match s.outside_factor {
            Some(f) => f * cap,
            None => g.value(s.alpha).min(cap),
        };
        let mut pinned = grid.clone();
        pinned.pin(|x| b.dist(x) < hgrid);
        let grid = &pinned;
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let d = d_ab(i);
                if d < s.alpha {
                    g.value(d).min(cap)
                } else {
                    outside
                }
            })
            .collect();
        let obstacle = Obstacle { values, cap };
        let popts = PerronOptions {
            tol: tol_rel * cap,
            ..PerronOptions::for_cap(cap)
        };
        let res = largest_subharmonic_minorant(&obstacle, grid, &popts)?;
        assertions.push(Assertion {
            name: "minorant converged".into(),
            expected: true,
            passed: res.converged,
            detail: format!(
                "{} sweeps, residual {:.3e}, error estimate {:.3e}, tol {:.3e}",
                res.iterations, res.residual, res.error_estimate, popts.tol
            ),
            witness: None,
        });
        let inactive = |i: usize| (res.field[i] - obstacle.values[i]).abs() <= 1e-12 * cap;
        let sub = discrete_subharmonic_check(&res.field, grid, 1e3 * popts.tol, |i| {
            grid.class(i) == NodeClass::Pinned || inactive(i)
        });
        assertions.push(Assertion {
            name: "minorant sub-mean".into(),
            expected: true,
            passed: sub.passed(),
            detail: format!("{} inactive nodes, largest excess {:.3e}", sub.checked, sub.max_excess),
            witness: sub.violations.first().map(|v| v.point.clone()),
        });
        if opts.cross_schedule {
            let jac = largest_subharmonic_minorant(
                &obstacle,
                grid,
                &PerronOptions {
                    schedule: Schedule::Jacobi,
                    ..popts
                },
            )?;
            let (gap, at) = res
                .field
                .iter()
                .zip(&jac.field)
                .enumerate()
                .map(|(i, (p, q))| ((p - q).abs(), i))
                .fold((0.0, 0), |acc, c| if c.0 > acc.0 { c } else { acc });
            assertions.push(Assertion {
                name: "schedules agree".into(),
                expected: true,
                passed: gap <= 10.0 * popts.tol,
                detail: format!("max |red-black - Jacobi| = {gap:.3e}, 10 tol = {:.3e}", 10.0 * popts.tol),
                witness: Some(grid.point(at)),
            });
        }
        for ((h, ev), summary) in bounds.iter().zip(&evaluators).zip(summaries.iter_mut()) {
            let m = margins_over(&ctx, &res.field, |i| {
                let d = ctx.d_b[i];
                (d > 0.0 && d < h.tau).then(|| ev.eval(h, d))
            });
            let r = margin_summary(&m, grid, allowance);
            assertions.push(assertion(&format!("minorant vs {}", h.method.slug()), true, &r));
            tables.extend(table_rows(&format!("minorant/{}", h.method.slug()), &m, &ctx.d_b, tables_lo, h.tau));
            summary.perron = Some(r);
        }
        for c in &s.controls {
            let (method, scale, stretch) = match c {
                Control::ScaleBound { method, factor } => (method, *factor, 1.0),
                Control::InflateTau { method, factor } => (method, 1.0, *factor),
                Control::ScaleU { .. } => continue,
            };
            let Some(j) = bounds.iter().position(|h| h.method == *method) else {
                notes.push(format!("control on {} skipped: bound unavailable", method.slug()));
                continue;
            };
            let (h, ev) = (&bounds[j], &evaluators[j]);
            let tau = h.tau * stretch;
            let m = margins_over(&ctx, &res.field, |i| {
                let d = ctx.d_b[i];
                (d > 0.0 && d < tau).then(|| scale * ev.eval(h, d))
            });
            let r = margin_summary(&m, grid, allowance);
            let name = if stretch != 1.0 {
                format!("control: minorant vs {} with tau x {stretch}", method.slug())
            } else {
                format!("control: minorant vs {} x {scale}", method.slug())
            };
            assertions.push(assertion(&name, false, &r));
        }

        if let Some(ds) = &s.domar {
            domar = Some(run_domar(s, ds, &ctx, &g, &a, adm.as_ref(), cap, allowance, tol_rel, seed, &mut assertions, &mut tables)?);
        }
        perron = Some(res);
    }

    // Barrier lemma.
    let mut barrier = Vec::new();
    if let Some(bs) = &s.barrier {
        let params = s.chart.expect("validated");
        let views = curve_views(&a)?;
        let mut label = 0u64;
        for view in &views {
            for anchor in default_anchors(view, params.radius, bs.anchors) {
                let anchor_w = view.to_world(&anchor);
                for &m in &bs.divisors {
                    let r = params.radius / (m * params.lipschitz);
                    let name = format!("barrier r = R/({m} L) at {:?}", short(&anchor_w));
                    label += 1;
                    match barrier_check(&g, &a, &params, &anchor_w, r, bs.samples, derive_seed(seed, 100 + label)) {
                        Ok(rep) => {
                            assertions.push(Assertion {
                                name,
                                expected: true,
                                passed: true,
                                detail: format!(
                                    "{} samples, lemma margin {:.4e}, cross ratio {:.4}",
                                    rep.samples, rep.lemma_min_margin, rep.cross_ratio
                                ),
                                witness: None,
                            });
                            barrier.push(rep);
                        }
                        Err(Error::BarrierViolation { kind, witness, detail }) => assertions.push(Assertion {
                            name,
                            expected: true,
                            passed: false,
                            detail: format!("{kind}: {detail}"),
                            witness: Some(witness),
                        }),
                        Err(e) => return Err(e),
                    }
                }
            }
        }
    }

    Ok(Report {
        scenario: s.name.clone(),
        seed,
        u_kind: match u {
            TestFunction::KernelSum { .. } => "kernel_sum",
            TestFunction::LogModulus { .. } => "log_modulus",
            TestFunction::GridField { .. } => "grid_field",
        }
        .into(),
        grid_n: n,
        hgrid,
        cap,
        allowance,
        allowance_formula: ALLOWANCE_FORMULA.into(),
        calibration,
        hypothesis,
        subharmonic,
        chart,
        bounds: summaries,
        perron,
        domar,
        barrier,
        notes,
        tables,
        probe,
        assertions,
    })
}

fn short(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| (v * 1e4).round() / 1e4).collect()
}

fn admissibility(a: &Set, spec: &AdmissibilitySpec, k: usize, seed: u64) -> Result<AdmissibilityEstimate> {
    spec.estimate(a, k, seed)
}

impl AdmissibilitySpec {
    /// The given constant, or a tube-sampling estimate on the default schedule.
    pub fn estimate(&self, a: &Set, k: usize, seed: u64) -> Result<AdmissibilityEstimate> {
        match self.c {
            Some(c) => Ok(AdmissibilityEstimate::exact(k, self.p_star, c)),
            None => admissibility_constant(a, self.p_star, &ProbeSchedule::default_for(a, self.samples), seed),
        }
    }
}

/// Bound evaluation; profiles that need root finding go through a floor
/// table with 1024 log nodes.
enum Evaluator {
    Direct,
    Table(FloorTable),
}

const TABLE_NODES: usize = 1024;
const DOMAIN_TABLE_NODES: usize = 256;

impl Evaluator {
    fn new(h: &ImprovedBound, d_min: f64) -> Self {
        match h.method {
            Method::AdmissibleRho => Evaluator::Table(h.floor_table(d_min.min(h.tau / 2.0), TABLE_NODES)),
            _ => Evaluator::Direct,
        }
    }

    fn eval(&self, h: &ImprovedBound, d: f64) -> f64 {
        match self {
            Evaluator::Table(t) if d <= h.tau => t.eval(d),
            _ => h.eval(d),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_domar(
    s: &Scenario,
    ds: &DomarSpec,
    ctx: &Ctx,
    g: &DecreasingFn,
    a: &Set,
    adm: Option<&AdmissibilityEstimate>,
    cap: f64,
    allowance: f64,
    tol_rel: f64,
    seed: u64,
    assertions: &mut Vec<Assertion>,
    tables: &mut Vec<MarginRow>,
) -> Result<DomarSummary> {
    let grid = ctx.grid;
    let k = grid.k as u32;
    let values: Vec<f64> = ctx.d_a.iter().map(|&d| g.value(d).min(cap)).collect();
    let obstacle = Obstacle { values, cap };
    let popts = PerronOptions {
        tol: tol_rel * cap,
        ..PerronOptions::for_cap(cap)
    };
    let res = largest_subharmonic_minorant(&obstacle, grid, &popts)?;

    let gf = g.clone();
    let set = Arc::new(a.clone());
    let field = Majorant::field("g(dist(x, A)) capped", move |x| gf.value(set.dist(x)).min(cap));
    let dist = distribution_function(&field, &s.omega, ds.samples, None, Some(cap), derive_seed(seed, 3))?;
    let f1 = f1_transform(&dist.as_decreasing()?, s.a)?;
    let thm_a = TheoremA::new(&f1, k, ds.eps, ds.lambda, s.a)?;

    let d_max = (0..grid.len())
        .filter(|&i| grid.class(i) != NodeClass::Ghost)
        .map(|i| ctx.d_bd[i])
        .fold(0.0, f64::max);
    let d_min = grid.h / 8.0;
    let table_a = FloorTable::build(|d| thm_a.bound_at(d), d_min, d_max * (1.0 + 1e-9), DOMAIN_TABLE_NODES);
    let check = |table: &FloorTable| {
        margins_over(ctx, &res.field, |i| {
            let d = ctx.d_bd[i];
            (d > 0.0).then(|| table.eval(d))
        })
    };
    let m = check(&table_a);
    let theorem_a = margin_summary(&m, grid, allowance);
    assertions.push(assertion("minorant vs theorem A", true, &theorem_a));
    tables.extend(table_rows("minorant/theorem_a", &m, &ctx.d_bd, d_min, d_max));

    let theorem_b = if ds.theorem_b {
        let spec = s.admissibility.as_ref().expect("validated");
        let adm = adm.expect("validated");
        let src = MuSource::Analytic(AnalyticMu {
            g: g.clone(),
            c1: adm.c1,
            inradius: inradius(&s.omega),
            cap: Some(cap),
        });
        let mu = mu_q_estimate(&src, &s.omega, s.a, spec.p_star)?;
        let thm_b = TheoremB::new(&mu, k, spec.p_star, ds.lambda, s.a)?;
        let table_b = FloorTable::build(|d| thm_b.bound_at(d), d_min, d_max * (1.0 + 1e-9), DOMAIN_TABLE_NODES);
        let m = check(&table_b);
        let r = margin_summary(&m, grid, allowance);
        assertions.push(assertion("minorant vs theorem B", true, &r));
        tables.extend(table_rows("minorant/theorem_b", &m, &ctx.d_bd, d_min, d_max));
        Some(r)
    } else {
        None
    };
    Ok(DomarSummary {
        perron: res,
        d: thm_a.constants.d,
        theorem_a,
        theorem_b,
    })
}
