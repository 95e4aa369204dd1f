//! Terminal payoffs `F = f(W_T)`.
//!
//! The catalog is closed: every smooth entry grows slower than `exp(c x²)`
//! for every `c > 0`, which is the growth condition the Clark-Ocone
//! representation needs, so membership is the admissibility check.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::deterministic::parse_params;
use crate::error::{invalid, QcdError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Payoff {
    /// `1{y >= K}`
    Indicator {
        strike: f64,
    },
    /// `Σ c_k y^k`
    Polynomial {
        coeffs: Vec<f64>,
    },
    Sin,
    Cos,
    /// `exp(rate · y)`
    Exp {
        rate: f64,
    },
}

impl Payoff {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Payoff::Indicator { strike } => {
                if y >= *strike {
                    1.0
                } else {
                    0.0
                }
            }
            Payoff::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &c| acc * y + c),
            Payoff::Sin => y.sin(),
            Payoff::Cos => y.cos(),
            Payoff::Exp { rate } => (rate * y).exp(),
        }
    }

    /// Classical derivative `f'`, when it exists as a catalog member.
    pub fn derivative(&self) -> Option<Payoff> {
        match self {
            Payoff::Indicator { .. } => None,
            Payoff::Polynomial { coeffs } => {
                let d: Vec<f64> = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, &c)| k as f64 * c)
                    .collect();
                Some(Payoff::Polynomial {
                    coeffs: if d.is_empty() { vec![0.0] } else { d },
                })
            }
            Payoff::Sin => Some(Payoff::Cos),
            // -sin and rate·exp are not bare catalog entries
            Payoff::Cos | Payoff::Exp { .. } => None,
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match self {
            Payoff::Indicator { strike } => Some(*strike),
            _ => None,
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, Payoff::Indicator { .. })
    }
}

impl fmt::Display for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Indicator { strike } => write!(f, "indicator:{strike}"),
            Payoff::Polynomial { coeffs } => {
                let parts: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            Payoff::Sin => write!(f, "sin"),
            Payoff::Cos => write!(f, "cos"),
            Payoff::Exp { rate } => write!(f, "exp:{rate}"),
        }
    }
}

impl FromStr for Payoff {
    type Err = QcdError;

    fn from_str(s: &str) -> Result<Self> {
        let (family, params) = match s.split_once(':') {
            Some((f, p)) => (f.trim(), Some(p)),
            None => (s.trim(), None),
        };
        match (family, params) {
            ("indicator", Some(p)) => Ok(Payoff::Indicator {
                strike: parse_params("indicator", p, 1)?[0],
            }),
            ("poly", Some(p)) => {
                let n = p.split(',').count();
                Ok(Payoff::Polynomial {
                    coeffs: parse_params("poly", p, n)?,
                })
            }
            ("identity", None) => Ok(Payoff::Polynomial {
                coeffs: vec![0.0, 1.0],
            }),
            ("square", None) => Ok(Payoff::Polynomial {
                coeffs: vec![0.0, 0.0, 1.0],
            }),
            ("sin", None) => Ok(Payoff::Sin),
            ("cos", None) => Ok(Payoff::Cos),
            ("exp", Some(p)) => Ok(Payoff::Exp {
                rate: parse_params("exp", p, 1)?[0],
            }),
            _ => invalid(format!("unsupported payoff {s:?}")),
        }
    }
}

impl TryFrom<String> for Payoff {
    type Error = QcdError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Payoff> for String {
    fn from(p: Payoff) -> String {
        p.to_string()
    }
}

/// `F = f(W_T)` for a Brownian motion started at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub payoff: Payoff,
    pub horizon: f64,
    pub start: f64,
}

impl PayoffSpec {
    pub fn new(payoff: Payoff, horizon: f64, start: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return invalid(format!("horizon must be positive, got {horizon}"));
        }
        if !start.is_finite() {
            return invalid("start point must be finite");
        }
        if let Payoff::Indicator { strike } = payoff {
            if !strike.is_finite() {
                return invalid("indicator strike must be finite");
            }
        }
        Ok(PayoffSpec {
            payoff,
            horizon,
            start,
        })
    }

    pub fn terminal_value(&self, w_terminal: f64) -> f64 {
        self.payoff.eval(w_terminal)
    }
}
