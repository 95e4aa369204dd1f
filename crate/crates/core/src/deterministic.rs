//! Deterministic time functions used for Girsanov drifts and market
//! coefficients.
//!
//! Every family here has closed-form integrals of the function and of its
//! square, so drift shifts, stochastic exponents and discount factors never
//! go through quadrature. The textual form `family:params` is what the CLI
//! accepts and what reports echo back.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, QcdError, Result};

/// A deterministic function of time on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DeterministicFn {
    /// `u -> c`
    Const(f64),
    /// `u -> intercept + slope * u`
    Linear { intercept: f64, slope: f64 },
    /// `u -> (n0 + n1 u) / (d0 + d1 u)`; arises as the market price of risk
    /// when the volatility is itself linear in time.
    AffineRatio { n0: f64, n1: f64, d0: f64, d1: f64 },
}

impl DeterministicFn {
    pub const ZERO: DeterministicFn = DeterministicFn::Const(0.0);

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            DeterministicFn::Const(c) => c,
            DeterministicFn::Linear { intercept, slope } => intercept + slope * u,
            DeterministicFn::AffineRatio { n0, n1, d0, d1 } => (n0 + n1 * u) / (d0 + d1 * u),
        }
    }

    /// `∫_s^t f(u) du`.
    pub fn integral(&self, s: f64, t: f64) -> f64 {
        match *self {
            DeterministicFn::Const(c) => c * (t - s),
            DeterministicFn::Linear { intercept, slope } => {
                intercept * (t - s) + 0.5 * slope * (t * t - s * s)
            }
            DeterministicFn::AffineRatio { .. } => {
                let (f_s, k, x) = self.ratio_expansion(s, t);
                let h = t - s;
                h * (f_s + k * h * log_ratio_g1(x))
            }
        }
    }

    /// `∫_s^t f(u)^2 du`.
    pub fn square_integral(&self, s: f64, t: f64) -> f64 {
        match *self {
            DeterministicFn::Const(c) => c * c * (t - s),
            DeterministicFn::Linear {
                intercept: a,
                slope: b,
            } => a * a * (t - s) + a * b * (t * t - s * s) + b * b * (t * t * t - s * s * s) / 3.0,
            DeterministicFn::AffineRatio { .. } => {
                let (f_s, k, x) = self.ratio_expansion(s, t);
                let h = t - s;
                let kh = k * h;
                h * (f_s * f_s + 2.0 * f_s * kh * log_ratio_g1(x) + kh * kh * log_ratio_g2(x))
            }
        }
    }

    /// `sup_{u in [0, horizon]} |f(u)|`. All families are monotone or
    /// constant on an interval where they are defined, so the endpoints
    /// suffice.
    pub fn sup_abs(&self, horizon: f64) -> f64 {
        self.eval(0.0).abs().max(self.eval(horizon).abs())
    }

    pub fn is_identically_zero(&self) -> bool {
        match *self {
            DeterministicFn::Const(c) => c == 0.0,
            DeterministicFn::Linear { intercept, slope } => intercept == 0.0 && slope == 0.0,
            DeterministicFn::AffineRatio { n0, n1, .. } => n0 == 0.0 && n1 == 0.0,
        }
    }

    /// Checks the function is finite on `[0, horizon]` (for the ratio family,
    /// that the denominator keeps one sign).
    pub fn validate_on(&self, horizon: f64) -> Result<()> {
        if let DeterministicFn::AffineRatio { d0, d1, .. } = *self {
            let (a, b) = (d0, d0 + d1 * horizon);
            if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
                return invalid(format!("denominator of {self} vanishes on [0, {horizon}]"));
            }
        }
        let ends = [self.eval(0.0), self.eval(horizon)];
        if ends.iter().any(|v| !v.is_finite()) {
            return invalid(format!("{self} is not finite on [0, {horizon}]"));
        }
        Ok(())
    }
}

// (n0 + n1 u)/(d0 + d1 u) = a + b/(d0 + d1 u)
impl DeterministicFn {
    // With d(u) = d0 + d1 u and f = n/d on [s, t]: f(s), the scaled residue
    // k = (n0 d1 - n1 d0)/d(s)² and x = d1 (t - s)/d(s), so that
    // f(u) = f(s) + k (u - s)/(1 + d1 (u - s)/d(s)). Nothing here divides by
    // d1, which keeps nearly linear ratios free of cancellation.
    fn ratio_expansion(&self, s: f64, t: f64) -> (f64, f64, f64) {
        let DeterministicFn::AffineRatio { n0, n1, d0, d1 } = *self else {
            unreachable!("ratio_expansion on a non-ratio function")
        };
        let ds = d0 + d1 * s;
        (
            (n0 + n1 * s) / ds,
            (n0 * d1 - n1 * d0) / (ds * ds),
            d1 * (t - s) / ds,
        )
    }
}

const SERIES_CUTOFF: f64 = 0.1;
const SERIES_TERMS: i32 = 40;

// (ln(1 + x) - x)/x² = -1/2 + x/3 - x²/4 + ...
fn log_ratio_g1(x: f64) -> f64 {
    if x.abs() >= SERIES_CUTOFF {
        return (x.ln_1p() - x) / (x * x);
    }
    (1..=SERIES_TERMS).rev().fold(0.0, |acc, j| {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc * x + sign / (j + 1) as f64
    })
}

// (2x - 2 ln(1 + x) - x²/(1 + x))/x³ = 1/3 - x/2 + 3x²/5 - ...
fn log_ratio_g2(x: f64) -> f64 {
    if x.abs() >= SERIES_CUTOFF {
        return (2.0 * x - 2.0 * x.ln_1p() - x * x / (1.0 + x)) / (x * x * x);
    }
    (2..=SERIES_TERMS + 1).rev().fold(0.0, |acc, j| {
        let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
        acc * x + sign * (1 - j) as f64 / (j + 1) as f64
    })
}

impl Default for DeterministicFn {
    fn default() -> Self {
        DeterministicFn::ZERO
    }
}

impl fmt::Display for DeterministicFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DeterministicFn::Const(c) => write!(f, "const:{c}"),
            DeterministicFn::Linear { intercept, slope } => write!(f, "linear:{intercept},{slope}"),
            DeterministicFn::AffineRatio { n0, n1, d0, d1 } => {
                write!(f, "ratio:{n0},{n1},{d0},{d1}")
            }
        }
    }
}

pub(crate) fn parse_params(family: &str, params: &str, expect: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = params
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| QcdError::InvalidArgument(format!("{family}: bad number {p:?}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != expect {
        return invalid(format!(
            "{family} expects {expect} parameter(s), got {}",
            values.len()
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return invalid(format!("{family}: parameters must be finite"));
    }
    Ok(values)
}

impl FromStr for DeterministicFn {
    type Err = QcdError;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(c) = s.trim().parse::<f64>() {
            if c.is_finite() {
                return Ok(DeterministicFn::Const(c));
            }
        }
        let (family, params) = s.split_once(':').ok_or_else(|| {
            QcdError::InvalidArgument(format!("expected family:params, got {s:?}"))
        })?;
        match family.trim() {
            "const" => Ok(DeterministicFn::Const(parse_params("const", params, 1)?[0])),
            "linear" => {
                let v = parse_params("linear", params, 2)?;
                Ok(DeterministicFn::Linear {
                    intercept: v[0],
                    slope: v[1],
                })
            }
            "ratio" => {
                let v = parse_params("ratio", params, 4)?;
                Ok(DeterministicFn::AffineRatio {
                    n0: v[0],
                    n1: v[1],
                    d0: v[2],
                    d1: v[3],
                })
            }
            other => invalid(format!("unsupported function family {other:?}")),
        }
    }
}

impl TryFrom<String> for DeterministicFn {
    type Error = QcdError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DeterministicFn> for String {
    fn from(f: DeterministicFn) -> String {
        f.to_string()
    }
}
