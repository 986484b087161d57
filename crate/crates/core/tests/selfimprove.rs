use growthbound::geometry::{AdmissibilityEstimate, ChartParams};
use growthbound::monotone::{ConcaveFn, DecreasingFn};
use growthbound::selfimprove::*;
use growthbound::Error;

fn params() -> ChartParams {
    ChartParams {
        lipschitz: 2.0,
        radius: 0.5,
    }
}

#[test]
fn power_law_upgrade_hits_closed_form() {
    for b in [0.5, 1.0] {
        let g = DecreasingFn::power_law(1.0, b).unwrap();
        let h = lipschitz_improve(&g, 3, &params(), 1.0).unwrap();
        let up = convexity_upgrade(&g, &h, 1.0).unwrap();
        let (c1, c2) = (h.constants.c1.unwrap(), h.constants.c2.unwrap());
        let want = (2.0 * c1.powf(-b) - c2.powf(-b)).powf(-1.0 / b);
        let got = up.constants.v.unwrap();
        assert!((got - want).abs() < 1e-6 * want, "b {b}: {got} vs {want}");
        assert!(got <= c1);
    }
}

#[test]
fn two_term_dominates_g() {
    let g = DecreasingFn::psi_eta(ConcaveFn::identity(), 3).unwrap();
    let h = lipschitz_improve(&g, 3, &params(), 1.0).unwrap();
    for i in 1..200 {
        let d = h.tau * i as f64 / 200.0;
        assert!(h.eval(d) >= g.value(d));
        assert!(h.eval(d) >= h.eval(d * 1.01) || d * 1.01 >= h.tau);
    }
}

#[test]
fn non_concave_profile_is_rejected() {
    // t^-3 in R^3 would need psi(s) = s^3.
    let g = DecreasingFn::power_law(1.0, 3.0).unwrap();
    assert!(matches!(
        lipschitz_improve(&g, 3, &params(), 1.0),
        Err(Error::InvalidProfile(_))
    ));
}

#[test]
fn power_type_v_matches_rho_algebra() {
    let (b, a) = (1.0, std::f64::consts::E);
    let g = DecreasingFn::power_law(1.0, b).unwrap();
    let adm = AdmissibilityEstimate::exact(2, 1.0, 2.0);
    let (_, r) = admissible_improve(&g, &adm, a, 1.0).unwrap();
    let pt = power_type_bound(&r, 0.5).unwrap();
    let k = (1.0 + b / a.ln()) * 2.0;
    let want = 1.0 / (3.0 * r.d * k);
    let got = pt.constants.v.unwrap();
    assert!((got / want - 1.0).abs() < 1e-6, "{got} vs {want}");
    assert!(pt.certificate.unwrap().min_margin() >= 0.0);
}

#[test]
fn rho_floor_holds() {
    let a = 2.0;
    for g in [
        DecreasingFn::power_law(1.0, 2.0).unwrap(),
        DecreasingFn::log_power(2.0, 1.0).unwrap(),
        DecreasingFn::exp_power(0.5).unwrap(),
    ] {
        let adm = AdmissibilityEstimate::exact(2, 1.0, 1.5);
        let (_, r) = admissible_improve(&g, &adm, a, 1.0).unwrap();
        for i in 0..30 {
            let t = 10f64.powf(-0.3 * i as f64) * 0.3;
            let lhs = r.rho_inverse(t);
            let rhs = 1.0 + g.log_value(t.min(g.domain().hi)) / a.ln();
            assert!(lhs >= rhs - 1e-9, "{g:?} t {t}: {lhs} < {rhs}");
        }
    }
}

#[test]
fn integrated_form_agrees_with_defining_form() {
    let g = DecreasingFn::log_power(2.0, 1.0).unwrap();
    let adm = AdmissibilityEstimate::exact(2, 1.0, 1.0);
    let (_, r) = admissible_improve(&g, &adm, 1.5, 1.0).unwrap();
    for i in 0..16 {
        let nu = 1.2 + 0.7 * i as f64;
        let x = r.rho.value(nu);
        let y = r.rho_direct(nu).unwrap();
        assert!((x / y - 1.0).abs() < 1e-5, "nu {nu}: {x} vs {y}");
    }
}

#[test]
fn asymptotic_exponents() {
    let adm = AdmissibilityEstimate::exact(2, 1.0, 1.0);
    for alpha in [1.0 / 3.0, 0.5, 0.9] {
        let g = DecreasingFn::exp_power(alpha).unwrap();
        let s = asymptotic_exponent(&g, &adm, 1.1, 1e-4, 1e-2, 21).unwrap();
        let want = alpha / (1.0 - alpha);
        assert!((s / want - 1.0).abs() < 0.05, "alpha {alpha}: {s} vs {want}");
    }
    let g = DecreasingFn::exp_power(1.0).unwrap();
    assert!(matches!(
        asymptotic_exponent(&g, &adm, 1.1, 1e-4, 1e-2, 21),
        Err(Error::Argument(_))
    ));
}
