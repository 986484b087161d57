use growthbound::geometry::*;
use growthbound::rng::shard_rng;
use growthbound::Error;
use proptest::prelude::*;
use rand::Rng;

fn set_strategy() -> impl Strategy<Value = Set> {
    prop_oneof![
        prop::collection::vec(prop::array::uniform2(-1.0f64..1.0), 1..20).prop_map(|pts| {
            SetDescr::PointCloud {
                points: pts.iter().map(|p| p.to_vec()).collect(),
            }
            .build()
            .unwrap()
        }),
        prop::collection::vec(prop::array::uniform2(-1.0f64..1.0), 2..8).prop_map(|pts| {
            SetDescr::Polyline {
                vertices: pts.iter().map(|p| p.to_vec()).collect(),
            }
            .build()
            .unwrap()
        }),
        (0.5f64..3.0, 0.1f64..0.5).prop_map(|(slope, period)| {
            SetDescr::LipGraph {
                dim: 2,
                lipschitz: slope,
                t_min: -0.8,
                t_max: 0.8,
                samples: 257,
                profile: ChartProfile::Sawtooth { slope, period },
                frame: None,
                origin: None,
            }
            .build()
            .unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dist_is_one_lipschitz(
        set in set_strategy(),
        x in prop::array::uniform2(-2.0f64..2.0),
        y in prop::array::uniform2(-2.0f64..2.0),
    ) {
        let gap = norm(&sub(&x, &y));
        let diff = (set.dist(&x) - set.dist(&y)).abs();
        prop_assert!(diff <= gap + 1e-12, "{diff} > {gap}");
    }
}

#[test]
fn segment_distance_to_an_outside_point() {
    let seg = SetDescr::Polyline {
        vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
    }
    .build()
    .unwrap();
    assert!((seg.dist(&[2.0, 3.0]) - 10f64.sqrt()).abs() < 1e-14);
    assert_eq!(seg.dist(&[0.5, 0.0]), 0.0);
}

// First exit of the ray x + t d from the region: march, then bisect.
fn marched_exit(omega: &Region, x: &[f64], d: &[f64], step: f64) -> f64 {
    let inside = |t: f64| omega.contains(&[x[0] + t * d[0], x[1] + t * d[1]]);
    let mut t = 0.0;
    while inside(t + step) {
        t += step;
    }
    let (mut lo, mut hi) = (t, t + step);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[test]
fn union_boundary_distance_matches_dense_scan() {
    let omega = Region::UnionOf {
        members: vec![
            Region::AxisBox {
                lo: vec![0.0, 0.0],
                hi: vec![2.0, 1.0],
            },
            Region::Ball {
                center: vec![2.0, 0.5],
                radius: 0.8,
            },
        ],
    };
    let mut rng = shard_rng(3, 0);
    let mut checked = 0;
    while checked < 20 {
        let x = [rng.random_range(-0.5..3.0), rng.random_range(-0.5..1.5)];
        if !omega.contains(&x) {
            continue;
        }
        checked += 1;
        let dirs = 20_000;
        let scan = (0..dirs)
            .map(|i| {
                let th = i as f64 / dirs as f64 * std::f64::consts::TAU;
                marched_exit(&omega, &x, &[th.cos(), th.sin()], 1e-3)
            })
            .fold(f64::INFINITY, f64::min);
        let got = omega.boundary_dist(&x).unwrap();
        // A ray missing a reentrant corner by half the angular step travels
        // at most d dtheta further.
        let dtheta = std::f64::consts::TAU / dirs as f64;
        assert!(got <= scan + 1e-9, "{x:?}: {got} > {scan}");
        assert!(scan - got <= got * dtheta + 1e-9, "{x:?}: {got} vs {scan}");
    }
    assert!(matches!(
        omega.boundary_dist(&[5.0, 5.0]),
        Err(Error::OutsideRegion { .. })
    ));
}

#[test]
fn point_tube_is_a_disk() {
    let p = SetDescr::PointCloud {
        points: vec![vec![0.0, 0.0]],
    }
    .build()
    .unwrap();
    let sigma = 0.1;
    let est = tube_measure(&p, sigma, &[0.0, 0.0], 0.5, 400_000, 1);
    let exact = std::f64::consts::PI * sigma * sigma;
    assert!((est.value - exact).abs() <= 4.0 * est.std_err, "{} vs {exact}", est.value);
}

#[test]
fn tube_measure_is_deterministic() {
    let seg = SetDescr::Polyline {
        vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
    }
    .build()
    .unwrap();
    let a = tube_measure(&seg, 0.05, &[0.5, 0.0], 1.0, 100_000, 9);
    let b = tube_measure(&seg, 0.05, &[0.5, 0.0], 1.0, 100_000, 9);
    assert_eq!(a, b);
}

#[test]
fn segment_assouad_dimension_is_one() {
    let seg = SetDescr::Polyline {
        vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
    }
    .build()
    .unwrap();
    let dim = assouad_estimate(&seg, &default_scale_pairs(&seg), 16).unwrap();
    assert!((dim - 1.0).abs() < 0.1, "{dim}");
}

#[test]
fn planted_chart_violation_is_detected() {
    let steep = SetDescr::LipGraph {
        dim: 2,
        lipschitz: 3.0,
        t_min: -0.75,
        t_max: 0.75,
        samples: 385,
        profile: ChartProfile::Sawtooth {
            slope: 3.0,
            period: 0.25,
        },
        frame: None,
        origin: None,
    }
    .build()
    .unwrap();
    let params = ChartParams {
        lipschitz: 2.0,
        radius: 0.3,
    };
    assert!(matches!(
        lipschitz_chart_check(&steep, &params, None),
        Err(Error::ChartViolation { .. })
    ));
    let ok = ChartParams {
        lipschitz: 3.0,
        radius: 0.3,
    };
    let rep = lipschitz_chart_check(&steep, &ok, None).unwrap();
    assert!(rep.max_slope <= 3.0 + 1e-9);
    assert!(rep.lower_excess <= 1e-9 && rep.upper_excess <= 1e-9);
}
