//! Gaussian heat kernel, its spatial derivatives and the `√n!`-normalised
//! Hermite polynomials.
//!
//! With `p(t, x, y) = exp(-(x-y)^2 / 2t) / √(2πt)` and
//! `H_n(x) = (-1)^n / √n! · e^{x²/2} dⁿ/dxⁿ e^{-x²/2}`, the spatial
//! derivatives are
//!
//! ```text
//! ∂ₓⁿ p(t, x, y) = (-1)^n √n! t^{-n/2} p(t, x, y) H_n((x - y)/√t)
//! ```
//!
//! which is how [`density_dx`] evaluates them. The normalised polynomials
//! obey `H_{n+1}(x) = (x H_n(x) - √n H_{n-1}(x)) / √(n+1)`, obtained from
//! the probabilists' recurrence `He_{n+1} = x He_n - n He_{n-1}` after
//! dividing through by `√(n+1)!`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, QcdError, Result};

/// Default cap on the derivative order.
pub const DEFAULT_MAX_ORDER: usize = 12;

/// Orders above this overflow `√n!` scaled quantities for moderate `t`.
pub const HARD_MAX_ORDER: usize = 150;

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("heat kernel needs t > 0, got {t}"));
    }
    Ok(())
}

fn check_order(n: usize, max: usize) -> Result<()> {
    if n > max || n > HARD_MAX_ORDER {
        return Err(QcdError::UnsupportedOrder {
            order: n,
            max: max.min(HARD_MAX_ORDER),
        });
    }
    Ok(())
}

fn gaussian(t: f64, u: f64) -> f64 {
    (-u * u / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// `p(t, x, y)`.
pub fn density(t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    Ok(gaussian(t, x - y))
}

/// `∂ₓⁿ p(t, x, y)` with the default order cap.
pub fn density_dx(n: usize, t: f64, x: f64, y: f64) -> Result<f64> {
    density_dx_capped(n, t, x, y, DEFAULT_MAX_ORDER)
}

pub fn density_dx_capped(n: usize, t: f64, x: f64, y: f64, max_order: usize) -> Result<f64> {
    check_time(t)?;
    check_order(n, max_order)?;
    if n == 0 {
        return Ok(gaussian(t, x - y));
    }
    Ok(hermite_form_unchecked(n, t, x - y))
}

/// Normalised Hermite polynomial `H_n(x)` with the default order cap.
pub fn hermite(n: usize, x: f64) -> Result<f64> {
    hermite_capped(n, x, DEFAULT_MAX_ORDER)
}

pub fn hermite_capped(n: usize, x: f64, max_order: usize) -> Result<f64> {
    check_order(n, max_order)?;
    Ok(hermite_unchecked(n, x))
}

fn hermite_unchecked(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next = (x * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `(-1)^n √n! t^{-n/2} p(t, x) H_n(x/√t)` for `n >= 1`.
pub fn hermite_form(n: usize, t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    if n == 0 {
        return Err(QcdError::InvalidArgument(
            "hermite_form is defined for n >= 1".into(),
        ));
    }
    check_order(n, DEFAULT_MAX_ORDER)?;
    Ok(hermite_form_unchecked(n, t, x))
}

fn hermite_form_unchecked(n: usize, t: f64, x: f64) -> f64 {
    let sqrt_t = t.sqrt();
    // √n! t^{-n/2} accumulated factor by factor.
    let mut scale = 1.0;
    for k in 1..=n {
        scale *= (k as f64).sqrt() / sqrt_t;
    }
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * scale * gaussian(t, x) * hermite_unchecked(n, x / sqrt_t)
}

/// `∂ₓⁿ p(t, x, y)` through explicit polynomial coefficients:
/// `∂ₓⁿ p = p · Q_n(u)`, `u = x - y`, with `Q_0 = 1` and
/// `Q_{n+1} = Q_n' - (u/t) Q_n`.
///
/// Independent of the Hermite route; used for residual reports.
pub fn density_dx_expanded(n: usize, t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    check_order(n, DEFAULT_MAX_ORDER)?;
    let mut coeffs = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            if k > 0 {
                next[k - 1] += k as f64 * c;
            }
            next[k + 1] -= c / t;
        }
        coeffs = next;
    }
    let u = x - y;
    let poly = coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c);
    Ok(gaussian(t, u) * poly)
}

/// `|∂ₜ ∂ₓⁿ p - ½ ∂ₓ² ∂ₓⁿ p|` at `(t, x, y)`, the time side a central
/// difference with step `10⁻⁴ t` and the space side a central difference of
/// `∂ₓⁿ⁺¹ p` with step `10⁻⁴ √t`.
pub fn heat_equation_residual(n: usize, t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    check_order(n + 1, DEFAULT_MAX_ORDER)?;
    let ht = 1e-4 * t;
    let hx = 1e-4 * t.sqrt();
    let dt = (density_dx(n, t + ht, x, y)? - density_dx(n, t - ht, x, y)?) / (2.0 * ht);
    let dxx = (density_dx(n + 1, t, x + hx, y)? - density_dx(n + 1, t, x - hx, y)?) / (2.0 * hx);
    Ok((dt - 0.5 * dxx).abs())
}

/// Standard normal CDF, `Φ(z) = erfc(-z/√2) / 2`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// A validated `(n, t, x, y)` kernel evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub n: usize,
}

impl KernelEval {
    pub fn new(n: usize, t: f64, x: f64, y: f64) -> Result<Self> {
        check_time(t)?;
        check_order(n, DEFAULT_MAX_ORDER)?;
        Ok(KernelEval { t, x, y, n })
    }

    pub fn value(&self) -> f64 {
        if self.n == 0 {
            gaussian(self.t, self.x - self.y)
        } else {
            hermite_form_unchecked(self.n, self.t, self.x - self.y)
        }
    }
}
