use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear non-increasing table. A jump is two knots sharing the
/// same abscissa; at a jump the value is the first listed knot unless the
/// table has been right-regularized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub knots: Vec<[f64; 2]>,
    #[serde(default)]
    pub right_continuous: bool,
}

impl Table {
    pub fn new(knots: Vec<[f64; 2]>) -> Result<Self> {
        let table = Table {
            knots,
            right_continuous: false,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.len() < 2 {
            return Err(Error::Argument("a table needs at least two knots".into()));
        }
        for w in self.knots.windows(2) {
            let ([t0, v0], [t1, v1]) = (w[0], w[1]);
            if !(t0.is_finite() && t1.is_finite() && v0.is_finite() && v1.is_finite()) {
                return Err(Error::Argument("table knots must be finite".into()));
            }
            if t1 < t0 {
                return Err(Error::Argument(format!(
                    "table abscissae must increase ({t0} then {t1})"
                )));
            }
            if v1 > v0 {
                return Err(Error::Argument(format!(
                    "table values must not increase ({v0} then {v1} at t = {t1})"
                )));
            }
            if t1 == t0 && v1 == v0 {
                return Err(Error::Argument(format!("duplicate knot at t = {t0}")));
            }
        }
        for w in self.knots.windows(3) {
            if w[0][0] == w[1][0] && w[1][0] == w[2][0] {
                return Err(Error::Argument(format!(
                    "more than two knots at t = {}",
                    w[0][0]
                )));
            }
        }
        Ok(())
    }

    pub fn t_min(&self) -> f64 {
        self.knots[0][0]
    }

    pub fn t_max(&self) -> f64 {
        self.knots[self.knots.len() - 1][0]
    }

    pub fn first_value(&self) -> f64 {
        self.knots[0][1]
    }

    pub fn last_value(&self) -> f64 {
        self.knots[self.knots.len() - 1][1]
    }

    /// Value at `t`, clamped to the end values outside the table.
    pub fn value(&self, t: f64) -> f64 {
        let k = &self.knots;
        let count_le = k.partition_point(|p| p[0] <= t);
        if count_le == 0 {
            return k[0][1];
        }
        let i = count_le - 1;
        if k[i][0] == t {
            if self.right_continuous {
                return k[i][1];
            }
            let first = k.partition_point(|p| p[0] < t);
            return k[first][1];
        }
        if i == k.len() - 1 {
            return k[i][1];
        }
        let ([t0, v0], [t1, v1]) = (k[i], k[i + 1]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Slope of the segment containing `t` (zero outside the table).
    pub fn slope(&self, t: f64) -> f64 {
        let k = &self.knots;
        let count_le = k.partition_point(|p| p[0] <= t);
        if count_le == 0 || count_le == k.len() {
            return 0.0;
        }
        let ([t0, v0], [t1, v1]) = (k[count_le - 1], k[count_le]);
        if t1 == t0 {
            return f64::NEG_INFINITY;
        }
        (v1 - v0) / (t1 - t0)
    }

    /// Exact integral of the piecewise-linear table over `[from, t_max]`.
    pub fn integral_from(&self, from: f64) -> f64 {
        let mut total = 0.0;
        for w in self.knots.windows(2) {
            let ([t0, v0], [t1, v1]) = (w[0], w[1]);
            if t1 <= from || t1 == t0 {
                continue;
            }
            let a = t0.max(from);
            let va = if a == t0 { v0 } else { v0 + (v1 - v0) * (a - t0) / (t1 - t0) };
            total += 0.5 * (va + v1) * (t1 - a);
        }
        total
    }

    /// `inf { t : value(t) <= s }`, found by binary search over the knots.
    pub fn inverse(&self, s: f64) -> f64 {
        let k = &self.knots;
        let j = k.partition_point(|p| p[1] > s);
        if j == 0 {
            return k[0][0];
        }
        if j == k.len() {
            return self.t_max();
        }
        let ([t0, v0], [t1, v1]) = (k[j - 1], k[j]);
        if t1 == t0 {
            return t0;
        }
        let t = t0 + (v0 - s) / (v0 - v1) * (t1 - t0);
        t.clamp(t0, t1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step() -> Table {
        // 3 on [0, 1), 1 on [1, 2].
        Table::new(vec![[0.0, 3.0], [1.0, 3.0], [1.0, 1.0], [2.0, 1.0]]).unwrap()
    }

    #[test]
    fn knot_values_are_exact() {
        let t = Table::new(vec![[1.0, 1.0], [2.0, 0.5], [4.0, 0.25]]).unwrap();
        assert_eq!(t.value(2.0), 0.5);
        assert_eq!(t.value(4.0), 0.25);
        assert_eq!(t.value(3.0), 0.375);
    }

    #[test]
    fn jump_value_depends_on_regularization() {
        let mut t = step();
        assert_eq!(t.value(1.0), 3.0);
        t.right_continuous = true;
        assert_eq!(t.value(1.0), 1.0);
    }

    #[test]
    fn inverse_takes_left_end_of_preimage() {
        let t = step();
        assert_eq!(t.inverse(1.0), 1.0);
        assert_eq!(t.inverse(3.0), 0.0);
        assert_eq!(t.inverse(2.0), 1.0);
    }

    #[test]
    fn integral_of_step() {
        let t = step();
        assert_eq!(t.integral_from(0.0), 4.0);
        assert_eq!(t.integral_from(0.5), 2.5);
        assert_eq!(t.integral_from(1.5), 0.5);
    }

    #[test]
    fn rejects_increasing_values() {
        assert!(Table::new(vec![[0.0, 1.0], [1.0, 2.0]]).is_err());
        assert!(Table::new(vec![[1.0, 1.0], [0.0, 0.0]]).is_err());
    }
}
