use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::check_simplex;

/// Running cost `r(x,u) = c (⟨e,x⟩⁺)^m |u|^m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub c: f64,
    pub m: f64,
}

impl CostSpec {
    pub fn new(c: f64, m: f64) -> Result<Self> {
        let spec = CostSpec { c, m };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::config(
                "cost.c",
                format!("must be finite and nonnegative, got {}", self.c),
            ));
        }
        if !(self.m >= 1.0 && self.m.is_finite()) {
            return Err(Error::config(
                "cost.m",
                format!("exponent must be at least 1, got {}", self.m),
            ));
        }
        Ok(())
    }

    /// The ergodic problem needs `m > 1`.
    pub fn require_ergodic(&self) -> Result<()> {
        self.validate()?;
        if self.m <= 1.0 {
            return Err(Error::config(
                "cost.m",
                format!("the ergodic problem needs an exponent above 1, got {}", self.m),
            ));
        }
        Ok(())
    }

    /// Unchecked evaluation.
    pub fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        let s = x.iter().sum::<f64>();
        if s <= 0.0 || self.c == 0.0 {
            return 0.0;
        }
        let norm2: f64 = u.iter().map(|v| v * v).sum();
        self.c * (s * s * norm2).powf(0.5 * self.m)
    }

    /// `c |q|^m` for a scaled queue vector `q`; equals `r(x,u)` when
    /// `q = ⟨e,x⟩⁺u`.
    pub fn queue_cost(&self, q: &[f64]) -> f64 {
        if self.c == 0.0 {
            return 0.0;
        }
        let norm2: f64 = q.iter().map(|v| v * v).sum();
        self.c * norm2.powf(0.5 * self.m)
    }
}

/// `c (⟨e,x⟩⁺)^m |u|^m`, rejecting `u` off the simplex by more than 1e-9.
pub fn running_cost(x: &[f64], u: &[f64], cost: &CostSpec) -> Result<f64> {
    check_simplex(u, 1e-9)?;
    Ok(cost.eval(x, u))
}
