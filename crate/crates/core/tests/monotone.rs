mod common;

use growthbound::monotone::{ConcaveFn, DecreasingFn, Table};
use growthbound::rng::shard_rng;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inverse_law_holds_for_every_family(seed in any::<u64>(), family in 0usize..6) {
        let mut rng = shard_rng(seed, 0);
        let f = common::random_fn(&mut rng, family);
        for s in common::probe_levels(&mut rng, &f, 50) {
            let t = f.inverse_value(s);
            let v = f.value(t);
            prop_assert!(v <= s + 1e-6, "{:?}: f(f^-({s})) = {v}", f);
        }
    }

    #[test]
    fn inverse_is_non_increasing(seed in any::<u64>(), family in 0usize..6) {
        let mut rng = shard_rng(seed, 1);
        let f = common::random_fn(&mut rng, family);
        let inv = f.gen_inverse();
        let mut s = common::probe_levels(&mut rng, &f, 40);
        s.sort_by(f64::total_cmp);
        let vals: Vec<f64> = s.iter().map(|&x| inv.value(x)).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-300, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn power_law_scaling_is_an_identity(
        c in 0.01f64..100.0, b in 0.05f64..5.0, t in 1e-6f64..10.0, k in 1e-3f64..1e3,
    ) {
        let f = DecreasingFn::power_law(c, b).unwrap();
        let lhs = f.value(k * t);
        let rhs = k.powf(-b) * f.value(t);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs(), "{lhs} vs {rhs}");
    }

    #[test]
    fn concave_profiles_lie_above_chords(
        kind in 0usize..4, a in 0.1f64..5.0, t1 in 0.01f64..50.0, d1 in 0.01f64..50.0, d2 in 0.01f64..50.0,
    ) {
        let psi = match kind {
            0 => ConcaveFn::Power { theta: (a / 5.0).min(1.0), coef: 1.0 + a },
            1 => ConcaveFn::Log1p { coef: a },
            2 => ConcaveFn::Affine { offset: a, slope: 1.0 / a },
            _ => ConcaveFn::Sum { terms: vec![
                ConcaveFn::Power { theta: 0.5, coef: a },
                ConcaveFn::Log1p { coef: 1.0 },
            ] },
        };
        let (t2, t3) = (t1 + d1, t1 + d1 + d2);
        let w = (t3 - t2) / (t3 - t1);
        let chord = w * psi.eval(t1) + (1.0 - w) * psi.eval(t3);
        prop_assert!(psi.eval(t2) >= chord - 1e-9 * chord.abs().max(1.0));
    }
}

#[test]
fn double_inverse_is_the_right_regularization() {
    let mut rng = shard_rng(11, 0);
    for family in [0, 1, 2, 3, 4] {
        for _ in 0..10 {
            let f = common::random_fn(&mut rng, family);
            let ff = f.gen_inverse().gen_inverse();
            let reg = f.right_regularize();
            let d = f.domain();
            let hi = if d.hi.is_finite() { d.hi } else { d.lo.max(0.0) + 20.0 };
            let lo = if d.lo > 0.0 { d.lo } else { hi * 1e-4 };
            for _ in 0..100 {
                let t = lo + (hi - lo) * rng.random_range(0.001..0.999);
                let (a, b) = (ff.value(t), reg.value(t));
                assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{f:?} at {t}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn jump_inverse_ignores_regularization() {
    let f = DecreasingFn::tabulated(
        Table::new(vec![[0.0, 10.0], [1.0, 8.0], [1.0, 4.0], [2.0, 4.0], [3.0, 1.0]]).unwrap(),
    )
    .unwrap();
    let reg = f.right_regularize();
    assert_eq!(f.value(1.0), 8.0);
    assert_eq!(reg.value(1.0), 4.0);
    let (fi, ri) = (f.gen_inverse(), reg.gen_inverse());
    for i in 0..1000 {
        let s = 0.5 + 10.0 * i as f64 / 1000.0;
        assert_eq!(fi.value(s), ri.value(s), "s = {s}");
    }
    // Flat at 4 on [1, 2]: the inverse is the left end.
    assert_eq!(fi.value(4.0), 1.0);
}

#[test]
fn tabulated_exp_reciprocal_inverse_matches_scan() {
    let knots: Vec<[f64; 2]> = (0..=400)
        .map(|i| {
            let t = 0.2 + 4.8 * i as f64 / 400.0;
            [t, (1.0 / t).exp()]
        })
        .collect();
    let f = DecreasingFn::tabulated(Table::new(knots).unwrap()).unwrap();
    let s = std::f64::consts::E;
    let got = f.gen_inverse().value(s);
    // Brute force: first of 10^6 grid points where f <= s.
    let n = 1_000_000;
    let scan = (0..=n)
        .map(|i| 0.2 + 4.8 * i as f64 / n as f64)
        .find(|&t| f.value(t) <= s)
        .unwrap();
    assert!((got - scan).abs() <= 4.8 / n as f64 + 1e-12, "{got} vs {scan}");
    assert!((got - 1.0).abs() < 1e-3, "{got}");
}

#[test]
fn tabulated_derivative_tracks_closed_form() {
    let g = DecreasingFn::power_law(1.0, 1.5).unwrap();
    let knots: Vec<[f64; 2]> = (0..=4000)
        .map(|i| {
            let t = 0.5 + 1.5 * i as f64 / 4000.0;
            [t, g.value(t)]
        })
        .collect();
    let f = DecreasingFn::tabulated(Table::new(knots).unwrap()).unwrap();
    for i in 1..50 {
        let t = 0.6 + 1.2 * i as f64 / 50.0;
        let (a, b) = (f.derivative(t).unwrap(), g.derivative(t).unwrap());
        let h_fd = 1e-5 * t;
        // Chord slopes of a 3.75e-4 spaced table differ from the tangent by
        // at most half the spacing times |g''|.
        let chord = 0.5 * 1.5 / 4000.0 * 1.5 * 2.5 * t.powf(-3.5);
        assert!((a - b).abs() <= 10.0 * h_fd + chord, "t = {t}: {a} vs {b}");
        assert!(a <= 0.0);
    }
}

#[test]
fn log_power_singularity_is_weak() {
    let f = DecreasingFn::log_power(2.0, 1.0).unwrap();
    let t = 1e-8;
    let r = f.value(0.5 * t) / f.value(t);
    assert!((1.0..=1.1).contains(&r), "{r}");
}

#[test]
fn spec_values() {
    assert_eq!(DecreasingFn::power_law(1.0, 2.0).unwrap().value(0.5), 4.0);
    assert!((DecreasingFn::exp_power(1.0).unwrap().value(1.0) - std::f64::consts::E).abs() < 1e-15);
    assert_eq!(DecreasingFn::power_law(1.0, 2.0).unwrap().gen_inverse().value(4.0), 0.5);
    assert!((DecreasingFn::power_law(1.0, 1.0).unwrap().derivative(2.0).unwrap() + 0.25).abs() < 1e-12);
    assert!((DecreasingFn::log_power(1.0, 1.0).unwrap().derivative(0.2).unwrap() + 5.0).abs() < 1e-9);
}
