use std::path::{Path, PathBuf};
use std::sync::Arc;

use growthbound::domar::{inradius, mu_q_estimate, AnalyticMu, MuSource, TheoremA, TheoremB};
use growthbound::geometry::{
    admissibility_constant, assouad_estimate, default_scale_pairs, log_space, AdmissibilityEstimate, ProbeSchedule,
};
use growthbound::harness::{corpus, run_compare, CompareSpec, Report, RunOptions, Scenario};
use growthbound::measure::{distribution_function, f1_transform, Majorant};
use growthbound::perron::{largest_subharmonic_minorant, write_field_csv, Grid, Obstacle, PerronOptions, Schedule};
use growthbound::rng::derive_seed;
use growthbound::selfimprove::{
    admissible_improve, asymptotic_exponent, convexity_upgrade, lipschitz_improve, power_type_bound, ImprovedBound,
    Method,
};
use growthbound::{harness, Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{load, parse, AdmissibilityConfig, DomarConfig, ImproveConfig, PerronConfig};
use crate::output::{num, Output};

/// Flags shared by every command.
pub struct Ctx {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

pub struct Outcome {
    pub passed: bool,
    pub summary: String,
}

fn require(ctx: &Ctx) -> Result<&Path> {
    ctx.config
        .as_deref()
        .ok_or_else(|| Error::config("--config", "this command needs a config file"))
}

fn grid_override(ctx: &Ctx) -> Result<()> {
    if ctx.grid.is_some_and(|n| !(3..=1025).contains(&n)) {
        return Err(Error::config("--grid", "must lie in [3, 1025]"));
    }
    if ctx.tol.is_some_and(|t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::config("--tol", "must lie in (0, 1)"));
    }
    Ok(())
}

fn bound_rows(h: &ImprovedBound, n: usize) -> impl Iterator<Item = Vec<String>> + '_ {
    log_space(h.tau * 1e-6, h.tau, n)
        .into_iter()
        .map(move |d| vec![num(d), num(h.eval(d))])
}

#[derive(Serialize)]
struct ImproveResult {
    bounds: Vec<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    admissibility: Option<AdmissibilityEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    asymptotic_exponent: Option<f64>,
    notes: Vec<String>,
}

pub fn improve(ctx: &Ctx) -> Result<Outcome> {
    let loaded = load::<ImproveConfig>(require(ctx)?)?;
    let c = &loaded.config;
    let parts = c.build(&loaded.dir)?;
    let out = Output::create(&ctx.out, ctx.seed)?;
    let g = &parts.g;
    let mut bounds = Vec::new();
    let mut notes = Vec::new();
    if c.methods.contains(&Method::LipschitzTwoTerm) || c.methods.contains(&Method::ConvexityUpgraded) {
        let lip = lipschitz_improve(g, c.k, c.chart.as_ref().expect("validated"), c.alpha)?;
        if c.methods.contains(&Method::ConvexityUpgraded) {
            match convexity_upgrade(g, &lip, c.convexity_beta) {
                Ok(h) => bounds.push(h),
                Err(Error::UpgradeUnavailable(m)) => notes.push(format!("convexity upgrade unavailable: {m}")),
                Err(e) => return Err(e),
            }
        }
        if c.methods.contains(&Method::LipschitzTwoTerm) {
            bounds.insert(0, lip);
        }
    }
    let mut adm_est = None;
    let mut exponent = None;
    if c.methods.contains(&Method::AdmissibleRho) || c.methods.contains(&Method::PowerTypeClosed) {
        let spec = c.admissibility.as_ref().expect("validated");
        let adm = match &parts.set {
            Some(set) => spec.estimate(set, c.k as usize, derive_seed(ctx.seed, 2))?,
            None => AdmissibilityEstimate::exact(c.k as usize, spec.p_star, spec.c.expect("validated")),
        };
        let (h, rho) = admissible_improve(g, &adm, c.a, c.dist_a_boundary.expect("validated"))?;
        let tau = h.tau;
        let mut power = None;
        if c.methods.contains(&Method::PowerTypeClosed) {
            match power_type_bound(&rho, tau) {
                Ok(p) => power = Some(p),
                Err(Error::LimitDiverges(m)) => {
                    notes.push(format!("power-type bound unavailable ({m}); the admissible bound is reported"))
                }
                Err(e) => return Err(e),
            }
        }
        if c.methods.contains(&Method::AdmissibleRho) || power.is_none() {
            bounds.push(h);
        }
        bounds.extend(power);
        if g.as_exp_power().is_some() {
            exponent = Some(asymptotic_exponent(g, &adm, c.a, 1e-4, 1e-2, 16)?);
        }
        adm_est = Some(adm);
    }
    let mut summary = String::new();
    for h in &bounds {
        let name = format!("h_{}.csv", h.method.slug());
        out.csv(&name, &["d", "h"], bound_rows(h, c.points))?;
        summary.push_str(&format!("{}: tau = {:.6e}, {}\n", h.method.slug(), h.tau, h.describe()));
    }
    if let Some(e) = exponent {
        summary.push_str(&format!("asymptotic exponent {e:.6}\n"));
    }
    for n in &notes {
        summary.push_str(&format!("note: {n}\n"));
    }
    let result = ImproveResult {
        bounds: bounds.iter().map(|h| h.record()).collect(),
        admissibility: adm_est,
        asymptotic_exponent: exponent,
        notes,
    };
    out.json("improve.json", "improve", c, &result)?;
    Ok(Outcome { passed: true, summary })
}

#[derive(Serialize)]
struct DomarResult {
    d_theorem_a: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_theorem_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    admissibility: Option<AdmissibilityEstimate>,
    distribution_samples: usize,
}

pub fn domar_bound(ctx: &Ctx) -> Result<Outcome> {
    let loaded = load::<DomarConfig>(require(ctx)?)?;
    let c = &loaded.config;
    let parts = c.build(&loaded.dir)?;
    let out = Output::create(&ctx.out, ctx.seed)?;
    let k = c.omega.dim() as u32;
    let cap = c.cap.unwrap_or(f64::INFINITY);
    let gf = parts.g.clone();
    let set = Arc::new(parts.set.clone());
    let field = Majorant::field("g(dist(x, A))", move |x| gf.value(set.dist(x)).min(cap));
    let dist = distribution_function(&field, &c.omega, c.samples, None, c.cap, derive_seed(ctx.seed, 3))?;
    let f1 = f1_transform(&dist.as_decreasing()?, c.a)?;
    let thm_a = TheoremA::new(&f1, k, c.eps, c.lambda, c.a)?;
    let mut adm_est = None;
    let thm_b = match &c.theorem_b {
        Some(spec) => {
            let adm = spec.estimate(&parts.set, k as usize, derive_seed(ctx.seed, 2))?;
            let src = MuSource::Analytic(AnalyticMu {
                g: parts.g.clone(),
                c1: adm.c1,
                inradius: inradius(&c.omega),
                cap: c.cap,
            });
            let mu = mu_q_estimate(&src, &c.omega, c.a, spec.p_star)?;
            adm_est = Some(adm);
            Some(TheoremB::new(&mu, k, spec.p_star, c.lambda, c.a)?)
        }
        None => None,
    };
    let hi = inradius(&c.omega);
    let lo = c.d_min * c.omega.scale();
    let mut ds = log_space(lo.min(hi / 2.0), hi, c.points);
    ds.reverse();
    let mut cols = vec!["dist", "bound_a"];
    if thm_b.is_some() {
        cols.push("bound_b");
    }
    out.csv(
        "domar.csv",
        &cols,
        ds.iter().map(|&d| {
            let mut r = vec![num(d), num(thm_a.bound_at(d).min(cap))];
            if let Some(b) = &thm_b {
                r.push(num(b.bound_at(d).min(cap)));
            }
            r
        }),
    )?;
    if !c.eps_sweep.is_empty() {
        let sweep = c
            .eps_sweep
            .iter()
            .map(|&e| TheoremA::new(&f1, k, e, c.lambda, c.a))
            .collect::<Result<Vec<_>>>()?;
        let names: Vec<String> = c.eps_sweep.iter().map(|e| format!("bound_a_eps_{e}")).collect();
        let mut cols = vec!["dist"];
        cols.extend(names.iter().map(String::as_str));
        out.csv(
            "domar_eps_sweep.csv",
            &cols,
            ds.iter().map(|&d| {
                let mut r = vec![num(d)];
                r.extend(sweep.iter().map(|t| num(t.bound_at(d).min(cap))));
                r
            }),
        )?;
    }
    out.csv(
        "distribution.csv",
        &["s", "f", "std_err"],
        (0..dist.s.len()).map(|i| vec![num(dist.s[i]), num(dist.f[i]), format!("{:.6e}", dist.std_err[i])]),
    )?;
    let result = DomarResult {
        d_theorem_a: thm_a.constants.d,
        d_theorem_b: thm_b.as_ref().map(|b| b.constants.d),
        admissibility: adm_est,
        distribution_samples: dist.n,
    };
    out.json("domar.json", "domar-bound", c, &result)?;
    Ok(Outcome {
        passed: true,
        summary: format!(
            "{} ray points, D = {:.6}; bound A at d = {:.3e}: {:.6e}\n",
            ds.len(),
            thm_a.constants.d,
            lo,
            thm_a.bound_at(lo).min(cap)
        ),
    })
}

#[derive(Serialize)]
struct PerronOut {
    grid: usize,
    h: f64,
    tol: f64,
    result: growthbound::perron::PerronResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_schedule_max_diff: Option<f64>,
}

pub fn perron(ctx: &Ctx) -> Result<Outcome> {
    let loaded = load::<PerronConfig>(require(ctx)?)?;
    grid_override(ctx)?;
    let mut c = loaded.config.clone();
    if let Some(n) = ctx.grid {
        c.grid = n;
    }
    if let Some(t) = ctx.tol {
        c.tol = t;
    }
    let parts = c.build(&loaded.dir)?;
    let grid = Grid::new(&c.omega, c.grid)?;
    let cap = c.cap.unwrap_or_else(|| parts.g.value(grid.h));
    if !(cap.is_finite() && cap > 0.0) {
        return Err(Error::config("cap", format!("g(h) = {cap} is not a usable cap")));
    }
    let out = Output::create(&ctx.out, ctx.seed)?;
    let g = parts.g.clone();
    let obstacle = Obstacle::from_fn(&grid, |x| g.value(parts.set.dist(x)), cap);
    let opts = PerronOptions {
        tol: c.tol * cap,
        schedule: c.schedule,
        ..PerronOptions::for_cap(cap)
    };
    let res = largest_subharmonic_minorant(&obstacle, &grid, &opts)?;
    let diff = if c.cross_check {
        let other = match c.schedule {
            Schedule::RedBlack => Schedule::Jacobi,
            Schedule::Jacobi => Schedule::RedBlack,
        };
        let alt = largest_subharmonic_minorant(&obstacle, &grid, &PerronOptions { schedule: other, ..opts })?;
        Some(
            res.field
                .iter()
                .zip(&alt.field)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    write_field_csv(&out.path("perron.csv"), &grid, &res.field, &obstacle, &out.header())?;
    let passed = res.converged && diff.is_none_or(|d| d <= 10.0 * opts.tol);
    let summary = format!(
        "{} sweeps, residual {:.3e}, active fraction {:.4}{}\n",
        res.iterations,
        res.residual,
        res.active_fraction,
        diff.map(|d| format!(", schedules differ by {d:.3e}")).unwrap_or_default()
    );
    let rec = PerronOut {
        grid: c.grid,
        h: grid.h,
        tol: opts.tol,
        result: res,
        cross_schedule_max_diff: diff,
    };
    out.json("perron.json", "perron", &c, &rec)?;
    Ok(Outcome { passed, summary })
}

#[derive(Serialize)]
struct AdmissibilityOut {
    estimate: AdmissibilityEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    assouad: Option<f64>,
}

pub fn admissibility(ctx: &Ctx) -> Result<Outcome> {
    let loaded = load::<AdmissibilityConfig>(require(ctx)?)?;
    let c = &loaded.config;
    let set = c.build()?;
    let out = Output::create(&ctx.out, ctx.seed)?;
    let schedule = ProbeSchedule::default_for(&set, c.samples);
    let estimate = admissibility_constant(&set, c.p_star, &schedule, derive_seed(ctx.seed, 2))?;
    let assouad = if c.assouad {
        Some(assouad_estimate(&set, &default_scale_pairs(&set), c.max_centers)?)
    } else {
        None
    };
    let summary = format!(
        "C = {:.6} (std err {:.3e}) over {} probes{}\n",
        estimate.c_hat,
        estimate.std_err,
        estimate.probes,
        assouad.map(|a| format!(", Assouad dimension {a:.4}")).unwrap_or_default()
    );
    out.json("admissibility.json", "admissibility", c, &AdmissibilityOut { estimate, assouad })?;
    Ok(Outcome { passed: true, summary })
}

#[derive(Serialize)]
struct CompareOut {
    rows: usize,
    ratio_increasing: bool,
    max_ratio: f64,
}

pub fn compare(ctx: &Ctx) -> Result<Outcome> {
    let path = require(ctx)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
    let spec: CompareSpec = parse(&text)?;
    spec.validate()?;
    let out = Output::create(&ctx.out, ctx.seed)?;
    let rows = run_compare(&spec)?;
    out.csv(
        "compare.csv",
        &["dist", "bound_a", "bound_b", "ratio"],
        rows.iter()
            .map(|r| vec![num(r.dist), num(r.bound_a), num(r.bound_b), num(r.ratio)]),
    )?;
    let increasing = rows.windows(2).all(|w| w[1].ratio >= w[0].ratio);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    out.json(
        "compare.json",
        "compare",
        &spec,
        &CompareOut {
            rows: rows.len(),
            ratio_increasing: increasing,
            max_ratio,
        },
    )?;
    Ok(Outcome {
        passed: true,
        summary: format!(
            "{} points, ratio {} toward the boundary, largest {max_ratio:.6}\n",
            rows.len(),
            if increasing { "non-decreasing" } else { "not monotone" }
        ),
    })
}

/// Scenarios named by `--config`, or the shipped corpus.
fn scenarios(ctx: &Ctx) -> Result<Vec<Scenario>> {
    let list = match &ctx.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| Error::config("--config", format!("{}: {e}", p.display())))?;
            vec![parse::<Scenario>(&text)?]
        }
        None => corpus::scenarios()?,
    };
    for s in &list {
        s.validate()?;
    }
    grid_override(ctx)?;
    Ok(list)
}

fn run_all(ctx: &Ctx, list: &[Scenario], opts: RunOptions) -> Vec<Result<Report>> {
    list.par_iter()
        .map(|s| harness::run_scenario(s, ctx.seed, &opts))
        .collect()
}

pub fn verify(ctx: &Ctx) -> Result<Outcome> {
    let list = scenarios(ctx)?;
    let out = Output::create(&ctx.out, ctx.seed)?;
    let opts = RunOptions {
        grid: ctx.grid,
        tol: ctx.tol,
        ..Default::default()
    };
    let mut summary = String::new();
    let mut passed = true;
    for (s, r) in list.iter().zip(run_all(ctx, &list, opts)) {
        let r = r?;
        let dir = out.sub(&s.name)?;
        dir.json("report.json", "verify", s, &r)?;
        dir.text("summary.txt", &r.summary_text())?;
        r.write_margin_csv(&dir.path("margins.csv"), &dir.header())?;
        passed &= r.ok();
        summary.push_str(&r.summary_text());
    }
    out.text("summary.txt", &summary)?;
    Ok(Outcome { passed, summary })
}

#[derive(Serialize)]
struct ProbeOut<'a> {
    u_kind: &'a str,
    notes: &'a [String],
    probe: &'a [harness::MarginRow],
    tables: &'a [harness::MarginRow],
}

pub fn probe(ctx: &Ctx) -> Result<Outcome> {
    let list = scenarios(ctx)?;
    let out = Output::create(&ctx.out, ctx.seed)?;
    let opts = RunOptions {
        grid: ctx.grid,
        tol: ctx.tol,
        skip_perron: true,
        ..Default::default()
    };
    let mut summary = String::new();
    for (s, r) in list.iter().zip(run_all(ctx, &list, opts)) {
        let r = r?;
        let dir = out.sub(&s.name)?;
        r.write_probe_csv(&dir.path("probe.csv"), &dir.header())?;
        r.write_margin_csv(&dir.path("margins.csv"), &dir.header())?;
        let rec = ProbeOut {
            u_kind: &r.u_kind,
            notes: &r.notes,
            probe: &r.probe,
            tables: &r.tables,
        };
        dir.json("probe.json", "probe", s, &rec)?;
        let v = r.probe.iter().map(|p| p.min_margin).fold(f64::INFINITY, f64::min);
        summary.push_str(&format!("{} ({}): smallest g^-(u)/dist(x, B) = {v:.6e}\n", s.name, r.u_kind));
    }
    out.text("summary.txt", &summary)?;
    Ok(Outcome { passed: true, summary })
}
