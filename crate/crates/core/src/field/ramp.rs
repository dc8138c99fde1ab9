use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ρ: [0,∞) → ℝ` with `ρ(t) = t` up to `t0` and constant from `t1` on.
///
/// On `[t0, t1]` the slope follows the cubic smoothstep
/// `ρ'(t) = 1 − 3s² + 2s³`, `s = (t − t0)/(t1 − t0)`, so `ρ` is a C² quartic
/// spline with `ρ' ∈ [0,1]`, `ρ'' ≤ 0` and plateau value `(t0 + t1)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RampProfile {
    /// `ρ(t) = t` everywhere.
    Identity,
    Smooth { t0: f64, t1: f64 },
}

impl RampProfile {
    pub fn smooth(t0: f64, t1: f64) -> Result<Self> {
        let r = Self::Smooth { t0, t1 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Identity => Ok(()),
            Self::Smooth { t0, t1 } => {
                if t0.is_finite() && t1.is_finite() && 0.0 <= t0 && t0 < t1 {
                    Ok(())
                } else {
                    Err(Error::InvalidRamp(format!("need 0 <= t0 < t1, got t0 = {t0}, t1 = {t1}")))
                }
            }
        }
    }

    /// First argument from which `ρ` is constant (`∞` for the identity).
    pub fn plateau_start(&self) -> f64 {
        match *self {
            Self::Identity => f64::INFINITY,
            Self::Smooth { t1, .. } => t1,
        }
    }

    /// `(ρ(t), ρ'(t), ρ''(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            Self::Identity => (t, 1.0, 0.0),
            Self::Smooth { t0, t1 } => {
                if t <= t0 {
                    (t, 1.0, 0.0)
                } else if t >= t1 {
                    (0.5 * (t0 + t1), 0.0, 0.0)
                } else {
                    let w = t1 - t0;
                    let s = (t - t0) / w;
                    let s2 = s * s;
                    let value = t0 + w * (s - s2 * s + 0.5 * s2 * s2);
                    let slope = 1.0 - 3.0 * s2 + 2.0 * s2 * s;
                    let curv = 6.0 * s * (s - 1.0) / w;
                    (value, slope, curv)
                }
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }
}

/// Radial C² cutoff: `1` up to `inner`, `0` from `outer` on, quintic smoothstep between.
pub(crate) fn cutoff(r: f64, inner: f64, outer: f64) -> (f64, f64, f64) {
    if r <= inner {
        return (1.0, 0.0, 0.0);
    }
    if r >= outer {
        return (0.0, 0.0, 0.0);
    }
    let w = outer - inner;
    let s = (r - inner) / w;
    let one_minus = 1.0 - s;
    let s3 = s * s * s;
    let step = s3 * (10.0 - 15.0 * s + 6.0 * s * s);
    let dstep = 30.0 * s * s * one_minus * one_minus;
    let d2step = 60.0 * s * one_minus * (1.0 - 2.0 * s);
    (1.0 - step, -dstep / w, -d2step / (w * w))
}
