use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Increasing concave profile `psi: (beta, inf) -> (0, inf)` composed with the
/// fundamental-solution profile to form majorants `g = psi o eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConcaveFn {
    /// `coef * s^theta`, `0 < theta <= 1`.
    Power {
        theta: f64,
        #[serde(default = "one")]
        coef: f64,
    },
    /// `coef * ln(1 + s)`.
    Log1p {
        #[serde(default = "one")]
        coef: f64,
    },
    /// `offset + slope * s`.
    Affine { offset: f64, slope: f64 },
    /// `(ln(s) / scale)^b`, concave once `ln s >= b - 1`.
    PowLog { b: f64, scale: f64 },
    /// Positive combination of the above.
    Sum { terms: Vec<ConcaveFn> },
}

fn one() -> f64 {
    1.0
}

impl ConcaveFn {
    pub fn identity() -> Self {
        ConcaveFn::Power {
            theta: 1.0,
            coef: 1.0,
        }
    }

    /// Left end of the domain.
    pub fn beta(&self) -> f64 {
        match self {
            ConcaveFn::Power { .. } | ConcaveFn::Log1p { .. } => 0.0,
            ConcaveFn::Affine { offset, slope } => {
                if *offset >= 0.0 {
                    0.0
                } else {
                    -offset / slope
                }
            }
            ConcaveFn::PowLog { b, .. } => (b - 1.0).max(0.0).exp(),
            ConcaveFn::Sum { terms } => terms.iter().map(|t| t.beta()).fold(0.0, f64::max),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ConcaveFn::Power { theta, coef } => coef * s.powf(*theta),
            ConcaveFn::Log1p { coef } => coef * s.ln_1p(),
            ConcaveFn::Affine { offset, slope } => offset + slope * s,
            ConcaveFn::PowLog { b, scale } => (s.ln() / scale).powf(*b),
            ConcaveFn::Sum { terms } => terms.iter().map(|t| t.eval(s)).sum(),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            ConcaveFn::Power { theta, coef } => coef * theta * s.powf(theta - 1.0),
            ConcaveFn::Log1p { coef } => coef / (1.0 + s),
            ConcaveFn::Affine { slope, .. } => *slope,
            ConcaveFn::PowLog { b, scale } => {
                b * (s.ln() / scale).powf(b - 1.0) / (scale * s)
            }
            ConcaveFn::Sum { terms } => terms.iter().map(|t| t.derivative(s)).sum(),
        }
    }

    /// Inverse of the increasing profile, when it has a closed form.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        match self {
            ConcaveFn::Power { theta, coef } => Some((y / coef).powf(1.0 / theta)),
            ConcaveFn::Log1p { coef } => Some((y / coef).exp_m1()),
            ConcaveFn::Affine { offset, slope } => Some((y - offset) / slope),
            ConcaveFn::PowLog { b, scale } => Some((scale * y.powf(1.0 / b)).exp()),
            ConcaveFn::Sum { .. } => None,
        }
    }

    fn check_params(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidProfile(msg.to_string()));
        match self {
            ConcaveFn::Power { theta, coef } => {
                if !(*theta > 0.0 && *theta <= 1.0) || *coef <= 0.0 {
                    return bad("power profile needs 0 < theta <= 1 and coef > 0");
                }
            }
            ConcaveFn::Log1p { coef } => {
                if *coef <= 0.0 {
                    return bad("log1p profile needs coef > 0");
                }
            }
            ConcaveFn::Affine { slope, .. } => {
                if *slope <= 0.0 {
                    return bad("affine profile needs slope > 0");
                }
            }
            ConcaveFn::PowLog { b, scale } => {
                if *b <= 0.0 || *scale <= 0.0 {
                    return bad("powlog profile needs b > 0 and scale > 0");
                }
            }
            ConcaveFn::Sum { terms } => {
                if terms.is_empty() {
                    return bad("empty sum profile");
                }
                for t in terms {
                    t.check_params()?;
                }
            }
        }
        Ok(())
    }

    /// Parameter check plus a sampled probe: increasing, and every sampled
    /// triple lies above its chord (up to a relative tolerance).
    pub fn validate(&self) -> Result<()> {
        self.check_params()?;
        let beta = self.beta();
        let start = if beta > 0.0 { beta } else { 1e-6 };
        let samples: Vec<f64> = (0..=240)
            .map(|i| start * (1.0 + 1e-9) + (start.max(1.0)) * (10f64.powf(i as f64 / 30.0) - 1.0))
            .collect();
        let values: Vec<f64> = samples.iter().map(|&s| self.eval(s)).collect();
        for w in values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidProfile(
                    "profile is not increasing on the probe grid".into(),
                ));
            }
        }
        for i in 1..samples.len() - 1 {
            let (s0, s1, s2) = (samples[i - 1], samples[i], samples[i + 1]);
            let w = (s1 - s0) / (s2 - s0);
            let chord = (1.0 - w) * values[i - 1] + w * values[i + 1];
            let tol = 1e-9 * values[i].abs().max(1.0);
            if values[i] < chord - tol {
                return Err(Error::InvalidProfile(format!(
                    "profile is not concave near s = {s1:.6e}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concave_profiles_validate() {
        for psi in [
            ConcaveFn::identity(),
            ConcaveFn::Power {
                theta: 0.5,
                coef: 2.0,
            },
            ConcaveFn::Log1p { coef: 1.0 },
            ConcaveFn::Affine {
                offset: 1.0,
                slope: 3.0,
            },
            ConcaveFn::PowLog { b: 2.0, scale: 1.0 },
            ConcaveFn::Sum {
                terms: vec![ConcaveFn::identity(), ConcaveFn::Log1p { coef: 1.0 }],
            },
        ] {
            psi.validate().unwrap();
        }
    }

    #[test]
    fn convex_profile_rejected() {
        let psi = ConcaveFn::Power {
            theta: 2.0,
            coef: 1.0,
        };
        assert!(psi.validate().is_err());
    }

    #[test]
    fn inverses_round_trip() {
        for psi in [
            ConcaveFn::Power {
                theta: 0.5,
                coef: 2.0,
            },
            ConcaveFn::Log1p { coef: 1.5 },
            ConcaveFn::Affine {
                offset: -1.0,
                slope: 2.0,
            },
            ConcaveFn::PowLog { b: 2.0, scale: 3.0 },
        ] {
            for s in [2.0, 5.0, 17.0] {
                let y = psi.eval(s);
                let back = psi.inverse(y).unwrap();
                assert!((back - s).abs() < 1e-10 * s, "{psi:?}");
            }
        }
    }
}
