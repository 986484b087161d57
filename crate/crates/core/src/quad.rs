//! Adaptive Gauss-Kronrod quadrature with helpers for integrable endpoint
//! singularities and semi-infinite ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod extension of the 7-point Gauss rule, nodes on [0, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_489_0,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-300,
            rel: 1e-10,
            max_subdivisions: 4000,
        }
    }
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Tolerance {
            rel,
            ..Default::default()
        }
    }
}

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive G7K15 on the finite interval [a, b].
///
/// Panels are bisected in order of decreasing error estimate until the total
/// estimate drops under `max(abs, rel * |value|)` or the subdivision budget
/// runs out; the best estimate is returned either way.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Quadrature {
    if a == b {
        return Quadrature {
            value: 0.0,
            error: 0.0,
            evals: 0,
        };
    }
    let (value, error) = kronrod_panel(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut evals = 15;
    let mut splits = 0;
    while total_err > tol.abs.max(tol.rel * total.abs()) && splits < tol.max_subdivisions {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod_panel(&f, worst.a, mid);
        let (v2, e2) = kronrod_panel(&f, mid, worst.b);
        evals += 30;
        splits += 1;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed the drift accumulated by the running updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Quadrature {
        value,
        error,
        evals,
    }
}

/// Integral over (a, b] of a function with an integrable singularity at `a`.
///
/// The range is cut into geometric panels `[a + w 2^{-j-1}, a + w 2^{-j}]`,
/// each integrated adaptively. Once panel contributions decay geometrically
/// the remainder near `a` is extrapolated from the last ratio. A ratio that
/// refuses to drop below one is reported as divergence.
pub fn integrate_left_singular<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Quadrature> {
    let width = b - a;
    if width <= 0.0 {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    let panel_tol = Tolerance {
        rel: tol.rel * 0.1,
        max_subdivisions: 200,
        ..tol
    };
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    let mut prev: Option<f64> = None;
    let mut hi = width;
    let mut stalled = 0;
    for _ in 0..1000 {
        let lo = 0.5 * hi;
        if a + lo == a + hi {
            break;
        }
        let q = integrate(&f, a + lo, a + hi, panel_tol);
        evals += q.evals;
        sum += q.value;
        err += q.error;
        hi = lo;
        if let Some(p) = prev {
            let ratio = if p != 0.0 { q.value / p } else { 0.0 };
            if q.value == 0.0 {
                return Ok(Quadrature {
                    value: sum,
                    error: err,
                    evals,
                });
            }
            if ratio.abs() >= 0.999 {
                stalled += 1;
                if stalled >= 40 {
                    return Err(Error::DivergentIntegral(format!(
                        "panel contributions stopped decaying near {a} (ratio {ratio:.4})"
                    )));
                }
            } else {
                stalled = 0;
                let tail = q.value * ratio / (1.0 - ratio);
                if tail.abs() <= tol.rel * sum.abs() && q.value.abs() <= tol.rel * sum.abs() {
                    return Ok(Quadrature {
                        value: sum + tail,
                        error: err + tail.abs() * 0.1,
                        evals,
                    });
                }
            }
        }
        prev = Some(q.value);
    }
    Ok(Quadrature {
        value: sum,
        error: err,
        evals,
    })
}

/// Integral over [a, inf). Panels double in width; the tail is extrapolated
/// the same way as in [`integrate_left_singular`].
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    tol: Tolerance,
) -> Result<Quadrature> {
    let panel_tol = Tolerance {
        rel: tol.rel * 0.1,
        max_subdivisions: 200,
        ..tol
    };
    let mut width = a.abs().max(1.0);
    let mut lo = a;
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    let mut prev: Option<f64> = None;
    let mut zero_run = 0;
    for _ in 0..1000 {
        let hi = lo + width;
        if !hi.is_finite() {
            break;
        }
        let q = integrate(&f, lo, hi, panel_tol);
        evals += q.evals;
        sum += q.value;
        err += q.error;
        lo = hi;
        width *= 2.0;
        if q.value == 0.0 {
            zero_run += 1;
            if zero_run >= 3 {
                return Ok(Quadrature {
                    value: sum,
                    error: err,
                    evals,
                });
            }
            prev = Some(0.0);
            continue;
        }
        zero_run = 0;
        if let Some(p) = prev {
            if p != 0.0 {
                let ratio = q.value / p;
                if ratio.abs() < 0.9 {
                    let tail = q.value * ratio / (1.0 - ratio);
                    if tail.abs() <= tol.rel * sum.abs().max(tol.abs)
                        && q.value.abs() <= tol.rel * sum.abs().max(tol.abs)
                    {
                        return Ok(Quadrature {
                            value: sum + tail,
                            error: err + tail.abs() * 0.1,
                            evals,
                        });
                    }
                }
            }
        }
        prev = Some(q.value);
    }
    Err(Error::DivergentTail(format!(
        "contributions beyond {lo:e} do not decay (running sum {sum:e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| 3.0 * x * x, 0.0, 2.0, Tolerance::default());
        assert!((q.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory() {
        let q = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, Tolerance::default());
        assert!((q.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn algebraic_singularity() {
        for alpha in [0.5_f64, 0.9, 0.97] {
            let q = integrate_left_singular(|x| x.powf(-alpha), 0.0, 1.0, Tolerance::relative(1e-10))
                .unwrap();
            let exact = 1.0 / (1.0 - alpha);
            assert!(
                ((q.value - exact) / exact).abs() < 1e-8,
                "alpha {alpha}: {} vs {exact}",
                q.value
            );
        }
    }

    #[test]
    fn log_singularity() {
        let q = integrate_left_singular(|x| -x.ln(), 0.0, 1.0, Tolerance::relative(1e-11)).unwrap();
        assert!((q.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_integrable_is_reported() {
        let r = integrate_left_singular(|x| 1.0 / x, 0.0, 1.0, Tolerance::relative(1e-10));
        assert!(matches!(r, Err(Error::DivergentIntegral(_))));
    }

    #[test]
    fn exponential_tail() {
        let q = integrate_to_infinity(|x| (-x).exp(), 1.0, Tolerance::relative(1e-11)).unwrap();
        assert!((q.value - (-1.0f64).exp()).abs() < 1e-11);
        let q = integrate_to_infinity(|x| x.powf(-3.0), 2.0, Tolerance::relative(1e-10)).unwrap();
        assert!((q.value - 0.125).abs() < 1e-9);
    }

    #[test]
    fn divergent_tail_is_reported() {
        let r = integrate_to_infinity(|x| 1.0 / x, 1.0, Tolerance::relative(1e-8));
        assert!(matches!(r, Err(Error::DivergentTail(_))));
    }
}
