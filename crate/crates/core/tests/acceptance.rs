//! End-to-end acceptance criteria. Each test writes one PASS/FAIL line to
//! stderr (uncaptured) before asserting.

mod common;

use std::io::Write;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use growthbound::domar::choose_constants;
use growthbound::geometry::{
    assouad_estimate, curve_views, default_anchors, default_scale_pairs, tube_measure, AdmissibilityEstimate,
    ChartParams, ChartProfile, Region, SetDescr,
};
use growthbound::harness::{barrier_check, corpus, run_compare, run_scenario, Report, RunOptions};
use growthbound::measure::{layer_cake_check, Majorant};
use growthbound::monotone::{fundamental_eta, ConcaveFn, DecreasingFn};
use growthbound::rng::shard_rng;
use growthbound::selfimprove::{asymptotic_exponent, convexity_upgrade, lipschitz_improve, AdmissibleRho};
use growthbound::Error;
use rayon::prelude::*;

fn record(id: u32, name: &str, passed: bool, detail: &str, start: Instant) {
    let line = format!(
        "criterion {id:>2} {}: {name} ({detail}; {:.1} s)\n",
        if passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "{line}");
}

#[test]
fn c01_generalized_inverse_law() {
    let start = Instant::now();
    let mut rng = shard_rng(2024, 0);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = String::new();
    for i in 0..1000 {
        let f = common::random_fn(&mut rng, i % 6);
        for s in common::probe_levels(&mut rng, &f, 100) {
            let excess = f.value(f.gen_inverse().value(s)) - s;
            if excess > worst {
                worst = excess;
                witness = format!("{} at s = {s:.6e}", f.describe());
            }
        }
    }
    record(
        1,
        "generalized inverse law over 1000 functions x 100 probes",
        worst <= 1e-6,
        &format!("max f(f^-(s)) - s = {worst:.3e}, worst {witness}"),
        start,
    );
}

#[test]
fn c02_d_lambda_feasibility() {
    let start = Instant::now();
    let e = std::f64::consts::E;
    let c = choose_constants(e, 2.0, 1, 2).unwrap();
    // a / (D^2 pi) + 1/a = 1 solved for D.
    let oracle = (e / (std::f64::consts::PI * (1.0 - 1.0 / e))).sqrt();
    let feas = c.feasibility();
    let ok = (c.d - 1.169965).abs() <= 1e-5 && (c.d - oracle).abs() <= 1e-12 && feas <= 1.0 && 1.0 - feas <= 1e-12;
    record(
        2,
        "choose_constants(e, 2, 1)",
        ok,
        &format!("D = {:.9}, closed form {oracle:.9}, feasibility sum {feas:.15}", c.d),
        start,
    );
}

/// `rho(nu) = m^(1/q) - int_0^m (mu^-)'(x) x^(1/q) dx` with `m = mu(nu - 1)`,
/// `mu^-` from `g` directly and its derivative by central differences,
/// midpoint rule on 10^6 nodes.
fn rho_oracle(b: f64, a: f64, c1: f64, q: f64, nu: f64) -> f64 {
    let g = |t: f64| t.powf(-b);
    let mu_inv = |x: f64| g((x / c1).powf(1.0 / q)).ln() / a.ln();
    let m = c1 * a.powf(-(nu - 1.0) / b * q);
    let n = 1_000_000;
    let dx = m / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let x = (i as f64 + 0.5) * dx;
        let h = 1e-6 * x;
        let d = (mu_inv(x + h) - mu_inv(x - h)) / (2.0 * h);
        sum += d * x.powf(1.0 / q) * dx;
    }
    m.powf(1.0 / q) - sum
}

#[test]
fn c03_power_law_rho_closed_form() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut cases = 0;
    for b in [0.5, 1.0, 2.0] {
        for a in [1.1, std::f64::consts::E] {
            for q in [0.5, 1.0] {
                let g = DecreasingFn::power_law(1.0, b).unwrap();
                let adm = AdmissibilityEstimate::exact(2, 2.0 - q, 2.0);
                let r = AdmissibleRho::new(&g, &adm, a).unwrap();
                for i in 0..32 {
                    let nu = 1.25 + 0.25 * i as f64;
                    let closed = (1.0 + b / a.ln()) * r.c1.powf(1.0 / q) * a.powf(-(nu - 1.0) / b);
                    let got = r.rho.value(nu);
                    worst = worst.max((got / closed - 1.0).abs());
                    if i % 8 == 0 {
                        let o = rho_oracle(b, a, r.c1, q, nu);
                        worst_oracle = worst_oracle.max((o / closed - 1.0).abs());
                    }
                    cases += 1;
                }
            }
        }
    }
    record(
        3,
        "power-law rho_ad closed form",
        worst <= 1e-5 && worst_oracle <= 1e-5,
        &format!("{cases} probes, max rel err {worst:.3e}, oracle quadrature vs closed form {worst_oracle:.3e}"),
        start,
    );
}

#[test]
fn c04_fast_growth_exponent() {
    let start = Instant::now();
    let adm = AdmissibilityEstimate::exact(2, 1.0, 1.0);
    let mut parts = Vec::new();
    let mut ok = true;
    for alpha in [1.0 / 3.0, 0.5, 0.9] {
        let g = DecreasingFn::exp_power(alpha).unwrap();
        let s = asymptotic_exponent(&g, &adm, 1.1, 1e-4, 1e-2, 21).unwrap();
        let want = alpha / (1.0 - alpha);
        let rel = (s / want - 1.0).abs();
        ok &= rel <= 0.05;
        parts.push(format!("alpha {alpha:.3}: {s:.4} vs {want:.4}"));
    }
    record(4, "asymptotic exponent alpha/(1-alpha)", ok, &parts.join(", "), start);
}

#[test]
fn c05_layer_cake() {
    let start = Instant::now();
    let disk = Region::unit_disk();
    let origin = Arc::new(
        SetDescr::PointCloud {
            points: vec![vec![0.0, 0.0]],
        }
        .build()
        .unwrap(),
    );
    let cases = [
        ("constant 3, t = 1", Majorant::Constant(3.0), 1.0),
        ("|x|, t = 0.5", Majorant::field("norm", |x: &[f64]| (x[0] * x[0] + x[1] * x[1]).sqrt()), 0.5),
        (
            "1/|x|, t = 2",
            Majorant::composed(DecreasingFn::power_law(1.0, 1.0).unwrap(), origin),
            2.0,
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (name, h, t)) in cases.iter().enumerate() {
        let lc = layer_cake_check(h, &disk, *t, 1_000_000, 77 + i as u64).unwrap();
        let pass = lc.residual <= 3.0 * lc.std_err + 1e-12 * lc.lhs.abs();
        ok &= pass;
        parts.push(format!("{name}: residual {:.2e} vs 3 se {:.2e}", lc.residual, 3.0 * lc.std_err));
    }
    record(5, "layer-cake identity at n = 1e6", ok, &parts.join(", "), start);
}

#[test]
fn c06_tube_and_assouad() {
    let start = Instant::now();
    let seg = SetDescr::Polyline {
        vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
    }
    .build()
    .unwrap();
    let sigma = 0.05;
    let est = tube_measure(&seg, sigma, &[0.5, 0.0], 1.0, 1_000_000, 5);
    let exact = 2.0 * sigma + std::f64::consts::PI * sigma * sigma;
    let tube_rel = (est.value / exact - 1.0).abs();

    let cantor = SetDescr::CantorDust {
        corners: 2,
        ratio: 1.0 / 3.0,
        depth: 10,
        lo: vec![0.0, 0.5],
        hi: vec![1.0, 0.5],
    }
    .build()
    .unwrap();
    let dim = assouad_estimate(&cantor, &default_scale_pairs(&cantor), 16).unwrap();
    let want = 2f64.ln() / 3f64.ln();
    record(
        6,
        "tube measure and Cantor Assouad dimension",
        tube_rel <= 0.02 && (dim - want).abs() <= 0.1,
        &format!(
            "tube {:.6} vs {exact:.6} (rel {tube_rel:.2e}), Assouad {dim:.4} vs {want:.4}",
            est.value
        ),
        start,
    );
}

fn corpus_run() -> Vec<Report> {
    corpus::scenarios()
        .unwrap()
        .par_iter()
        .map(|s| run_scenario(s, 0, &RunOptions::default()).unwrap())
        .collect()
}

fn first_run() -> &'static Vec<Report> {
    static RUN: OnceLock<Vec<Report>> = OnceLock::new();
    RUN.get_or_init(corpus_run)
}

#[test]
fn c07_envelope_soundness() {
    let start = Instant::now();
    let reports = first_run();
    let mut ok = true;
    let mut parts = Vec::new();
    for r in reports {
        let planted = r.assertions.iter().filter(|a| !a.expected).count();
        let flagged = r.assertions.iter().filter(|a| !a.expected && !a.passed).count();
        let minorant_checks = r.assertions.iter().filter(|a| a.name.starts_with("minorant vs")).count();
        let negative = r.scenario.starts_with("neg_");
        let pass = r.ok() && (!negative || flagged > 0) && (negative || minorant_checks > 0);
        ok &= pass;
        for a in r.unexpected() {
            let _ = std::io::stderr().write_all(format!("  {}: {} {}\n", r.scenario, a.name, a.detail).as_bytes());
        }
        parts.push(format!(
            "{} grid {} {} checks ({minorant_checks} minorant vs bound), {flagged}/{planted} planted flagged",
            r.scenario,
            r.grid_n,
            r.assertions.len()
        ));
    }
    record(7, "envelope soundness over the corpus", ok, &parts.join("; "), start);
}

#[test]
fn c08_barrier_lemma() {
    let start = Instant::now();
    let params = ChartParams {
        lipschitz: 2.0,
        radius: 0.3,
    };
    let lip = |dim, profile, lipschitz| {
        SetDescr::LipGraph {
            dim,
            lipschitz,
            t_min: -0.75,
            t_max: 0.75,
            samples: 385,
            profile,
            frame: None,
            origin: None,
        }
        .build()
        .unwrap()
    };
    let flat = lip(3, ChartProfile::Linear { slope: 0.0 }, 2.0);
    let saw = lip(
        2,
        ChartProfile::Sawtooth {
            slope: 2.0,
            period: 0.25,
        },
        2.0,
    );
    let steep = lip(
        2,
        ChartProfile::Sawtooth {
            slope: 3.0,
            period: 0.25,
        },
        3.0,
    );
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, set, k) in [("flat k=3", &flat, 3), ("sawtooth k=2", &saw, 2)] {
        let g = fundamental_eta(k).unwrap();
        let view = &curve_views(set).unwrap()[0];
        let anchor = view.to_world(&default_anchors(view, params.radius, 1)[0]);
        for m in [16.0, 32.0] {
            let r = params.radius / (m * params.lipschitz);
            match barrier_check(&g, set, &params, &anchor, r, 10_000, 9) {
                Ok(rep) => parts.push(format!(
                    "{name} R/{m}L: lemma margin {:.3e}, cross ratio {:.3}",
                    rep.lemma_min_margin, rep.cross_ratio
                )),
                Err(e) => {
                    ok = false;
                    parts.push(format!("{name} R/{m}L: {e}"));
                }
            }
        }
    }
    let g = fundamental_eta(2).unwrap();
    let view = &curve_views(&steep).unwrap()[0];
    let anchor = view.to_world(&default_anchors(view, params.radius, 1)[0]);
    let r = params.radius / (16.0 * params.lipschitz);
    match barrier_check(&g, &steep, &params, &anchor, r, 10_000, 9) {
        Err(Error::BarrierViolation { kind, .. }) => parts.push(format!("slope 3 declared L=2: {kind} violation detected")),
        other => {
            ok = false;
            parts.push(format!("slope 3 declared L=2 not detected: {other:?}"));
        }
    }
    record(8, "barrier lemma", ok, &parts.join(", "), start);
}

#[test]
fn c09_convexity_upgrade_exact() {
    let start = Instant::now();
    let params = ChartParams {
        lipschitz: 2.0,
        radius: 0.5,
    };
    let mut worst_power: f64 = 0.0;
    for b in [0.25, 0.5, 1.0] {
        let g = DecreasingFn::power_law(1.0, b).unwrap();
        let h = lipschitz_improve(&g, 3, &params, 1.0).unwrap();
        let up = convexity_upgrade(&g, &h, 1.0).unwrap();
        let (c1, c2) = (h.constants.c1.unwrap(), h.constants.c2.unwrap());
        let want = (2.0 * c1.powf(-b) - c2.powf(-b)).powf(-1.0 / b);
        worst_power = worst_power.max((up.constants.v.unwrap() - want).abs());
    }
    let g = DecreasingFn::psi_eta(ConcaveFn::identity(), 2).unwrap();
    let h = lipschitz_improve(&g, 2, &params, 1.0).unwrap();
    let up = convexity_upgrade(&g, &h, 1.0).unwrap();
    let (c1, c2) = (h.constants.c1.unwrap(), h.constants.c2.unwrap());
    let log_err = (up.constants.v.unwrap() - c1 * c1 / c2).abs();
    record(
        9,
        "convexity upgrade closed forms",
        worst_power <= 1e-6 && log_err <= 1e-9,
        &format!("power law abs err {worst_power:.3e}, log(1/t) abs err {log_err:.3e}"),
        start,
    );
}

#[test]
fn c10_compare_ratio_increasing() {
    let start = Instant::now();
    let spec = corpus::compare_by_name("disk_point_power").unwrap().unwrap();
    let rows = run_compare(&spec).unwrap();
    let increasing = rows.windows(2).all(|w| w[1].ratio >= w[0].ratio * (1.0 - 1e-12));
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("compare_disk_point_power.csv");
    growthbound::harness::write_compare_csv(&rows, &path, "# regression artifact").unwrap();
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    record(
        10,
        "A-vs-B ratio increasing toward the boundary",
        increasing && rows.len() == spec.points,
        &format!(
            "{} rows, ratio {:.4} at d = {:.2e} up to {:.4} at d = {:.2e}, written to {}",
            rows.len(),
            first.ratio,
            first.dist,
            last.ratio,
            last.dist,
            path.display()
        ),
        start,
    );
}

fn margin_csvs(reports: &[Report], dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for r in reports {
        for (kind, path) in [("margins", dir.join(format!("{}_margins.csv", r.scenario))), ("probe", dir.join(format!("{}_probe.csv", r.scenario)))] {
            if kind == "margins" {
                r.write_margin_csv(&path, "# fixed").unwrap();
            } else {
                r.write_probe_csv(&path, "# fixed").unwrap();
            }
            out.push((path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap()));
        }
    }
    out
}

#[test]
fn c11_determinism() {
    let start = Instant::now();
    let first = first_run();
    let second = corpus_run();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = margin_csvs(first, d1.path());
    let b = margin_csvs(&second, d2.path());
    let differing: Vec<&String> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| &x.0).collect();
    let json_same = first
        .iter()
        .zip(&second)
        .all(|(x, y)| serde_json::to_string(x).unwrap() == serde_json::to_string(y).unwrap());
    record(
        11,
        "determinism of corpus outputs",
        differing.is_empty() && json_same && a.len() == b.len(),
        &format!("{} CSVs compared, differing {differing:?}, reports identical {json_same}", a.len()),
        start,
    );
}
