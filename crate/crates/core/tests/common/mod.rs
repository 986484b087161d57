#![allow(dead_code)]

use growthbound::monotone::{ConcaveFn, DecreasingFn, Table};
use rand::Rng;

/// A random instance of one of the six families, selected by `family % 6`.
pub fn random_fn<R: Rng>(rng: &mut R, family: usize) -> DecreasingFn {
    match family % 6 {
        0 => DecreasingFn::power_law(rng.random_range(0.1..10.0), rng.random_range(0.1..4.0)).unwrap(),
        1 => DecreasingFn::log_power(rng.random_range(0.2..3.0), rng.random_range(0.5..4.0)).unwrap(),
        2 => DecreasingFn::exp_power(rng.random_range(0.1..2.0)).unwrap(),
        3 => {
            let psi = match rng.random_range(0..3) {
                0 => ConcaveFn::Power {
                    theta: rng.random_range(0.1..1.0),
                    coef: rng.random_range(0.5..3.0),
                },
                1 => ConcaveFn::Log1p {
                    coef: rng.random_range(0.5..3.0),
                },
                _ => ConcaveFn::Affine {
                    offset: rng.random_range(0.0..2.0),
                    slope: rng.random_range(0.5..3.0),
                },
            };
            DecreasingFn::psi_eta(psi, rng.random_range(2..5)).unwrap()
        }
        4 => {
            // Continuous table.
            let n = rng.random_range(2..30);
            let mut t = rng.random_range(0.01..1.0);
            let mut v = rng.random_range(10.0..100.0);
            let mut knots = Vec::new();
            for _ in 0..n {
                knots.push([t, v]);
                t += rng.random_range(0.01..1.0);
                v -= rng.random_range(0.0..3.0f64).min(v * 0.5);
            }
            DecreasingFn::tabulated(Table::new(knots).unwrap()).unwrap()
        }
        _ => {
            // Table with jumps and flats, right-regularized.
            let n = rng.random_range(2..20);
            let mut t = rng.random_range(0.01..1.0);
            let mut v = rng.random_range(10.0..100.0);
            let mut knots = vec![[t, v]];
            let mut jumped = false;
            for _ in 0..n {
                let pick = if jumped { rng.random_range(1..3) } else { rng.random_range(0..3) };
                jumped = pick == 0;
                match pick {
                    0 => {
                        v *= rng.random_range(0.3..0.9);
                        knots.push([t, v]);
                    }
                    1 => {
                        t += rng.random_range(0.01..1.0);
                        knots.push([t, v]);
                    }
                    _ => {
                        t += rng.random_range(0.01..1.0);
                        v *= rng.random_range(0.5..0.99);
                        knots.push([t, v]);
                    }
                }
            }
            knots.push([t + 1.0, v * 0.5]);
            DecreasingFn::tabulated(Table::new(knots).unwrap()).unwrap().right_regularize()
        }
    }
}

/// Probe values `s` spread over the range of `f` at moderate magnitude,
/// strictly above its lower limit.
pub fn probe_levels<R: Rng>(rng: &mut R, f: &DecreasingFn, n: usize) -> Vec<f64> {
    let d = f.domain();
    let floor = f.lower_limit();
    let hi_t = if d.hi.is_finite() { d.hi } else { d.lo.max(0.0) + 50.0 };
    let lo_t = if d.lo > 0.0 { d.lo } else { hi_t * 1e-6 };
    (0..n)
        .map(|_| {
            let t = lo_t + (hi_t - lo_t) * rng.random::<f64>();
            let v = f.value(t);
            let s = v * rng.random_range(0.5..2.0);
            s.min(1e6).max(floor * (1.0 + 1e-9) + 1e-12)
        })
        .collect()
}
