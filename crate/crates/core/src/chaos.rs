//! Wiener chaos of the Brownian indicator `F = 1{W_T >= K}`.
//!
//! The Stroock coefficients of `F` are constant on the simplex
//! `0 < t_1 <= … <= t_n < T`:
//!
//! ```text
//! g_0 = Φ((x - K)/√T),    g_n = ∂ₓ^{n-1} p(T, x - K)   (n >= 1)
//! ```
//!
//! and `F = Σ_n J_n(g_n)` with `J_n` the `n`-fold iterated Itô integral over
//! the simplex. Since `E[J_n(c)²] = c² Tⁿ/n!`, the norm identity
//! `Φ((x-K)/√T) = Σ g_n² Tⁿ/n!` needs no simulation.

use serde::{Deserialize, Serialize};

use crate::deterministic::DeterministicFn;
use crate::error::{domain, invalid, QcdError, Result};
use crate::heat_kernel::{density_dx_capped, normal_cdf, DEFAULT_MAX_ORDER, HARD_MAX_ORDER};
use crate::ito::{cond_exp_deriv, cond_exp_heat, heat_semigroup, heat_semigroup_dx};
use crate::paths::SamplePath;
use crate::payoff::PayoffSpec;
use crate::quadrature::GaussHermite;

/// Deepest nesting accepted by [`stroock_coeff_general`].
pub const MAX_GENERAL_DEPTH: usize = 3;

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return invalid(format!("horizon must be positive, got {horizon}"));
    }
    Ok(())
}

fn coeff_with_cap(n: usize, horizon: f64, x: f64, strike: f64, max_order: usize) -> Result<f64> {
    check_horizon(horizon)?;
    if n > max_order {
        return Err(QcdError::UnsupportedOrder {
            order: n,
            max: max_order,
        });
    }
    if n == 0 {
        return Ok(normal_cdf((x - strike) / horizon.sqrt()));
    }
    density_dx_capped(n - 1, horizon, x - strike, 0.0, max_order)
}

/// Indicator coefficient `g_n` (constant on the simplex), `n <= 12`.
pub fn stroock_coeff(n: usize, horizon: f64, x: f64, strike: f64) -> Result<f64> {
    coeff_with_cap(n, horizon, x, strike, DEFAULT_MAX_ORDER)
}

/// Coefficients of the indicator expanded in `W~ = W + ∫λ`: under the
/// tilde measure `W~` is a Brownian motion from `x`, and
/// `{W_T >= K} = {W~_T >= K + ∫_0^T λ}`.
pub fn stroock_coeff_com(
    n: usize,
    horizon: f64,
    x: f64,
    strike: f64,
    lambda: &DeterministicFn,
) -> Result<f64> {
    lambda.validate_on(horizon)?;
    stroock_coeff(n, horizon, x, strike + lambda.integral(0.0, horizon))
}

/// `g_0..=g_order` of the indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosCoefficients {
    pub order: usize,
    pub g: Vec<f64>,
    pub horizon: f64,
    pub start: f64,
    pub strike: f64,
}

impl ChaosCoefficients {
    /// Coefficients through `order`. The derivative-order cap is lifted to
    /// `order` here: at `t = T` the Hermite route has no small-time
    /// amplification.
    pub fn indicator(horizon: f64, start: f64, strike: f64, order: usize) -> Result<Self> {
        if order > HARD_MAX_ORDER {
            return Err(QcdError::UnsupportedOrder {
                order,
                max: HARD_MAX_ORDER,
            });
        }
        let cap = order.max(DEFAULT_MAX_ORDER);
        let g = (0..=order)
            .map(|n| coeff_with_cap(n, horizon, start, strike, cap))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChaosCoefficients {
            order,
            g,
            horizon,
            start,
            strike,
        })
    }

    /// Coefficients of the expansion in `W~` for a deterministic drift.
    pub fn indicator_com(
        horizon: f64,
        start: f64,
        strike: f64,
        order: usize,
        lambda: &DeterministicFn,
    ) -> Result<Self> {
        lambda.validate_on(horizon)?;
        let mut c = Self::indicator(
            horizon,
            start,
            strike + lambda.integral(0.0, horizon),
            order,
        )?;
        c.strike = strike;
        Ok(c)
    }

    /// `E[F²] = Φ((x - K)/√T)`; equals `g_0` for the indicator.
    pub fn target_norm(&self) -> f64 {
        self.g[0]
    }
}

/// Generic Stroock coefficient `E[D_{t_1} E[… D_{t_n} E[F | F_{t_n}] …| F_{t_1}]]`
/// for `F = f(W_T)`, evaluated by nesting heat-semigroup derivatives:
///
/// ```text
/// u_n(w)   = ∂_w E[f(W_T) | W_{t_n} = w]
/// u_k(w)   = ∂_w E[u_{k+1}(W_{t_{k+1}}) | W_{t_k} = w]
/// g_n      = E[u_1(W_{t_1})]
/// ```
///
/// Each level is a Gauss-Hermite rule (the innermost level is closed form
/// for the indicator), so the cost grows like `nodesⁿ`; depth is capped at 3.
pub fn stroock_coeff_general(spec: &PayoffSpec, n: usize, t_nodes: &[f64]) -> Result<f64> {
    stroock_coeff_general_with(GaussHermite::standard(), spec, n, t_nodes)
}

pub fn stroock_coeff_general_with(
    quad: &GaussHermite,
    spec: &PayoffSpec,
    n: usize,
    t_nodes: &[f64],
) -> Result<f64> {
    if n > MAX_GENERAL_DEPTH {
        return Err(QcdError::UnsupportedOrder {
            order: n,
            max: MAX_GENERAL_DEPTH,
        });
    }
    if t_nodes.len() != n {
        return invalid(format!(
            "order {n} needs {n} simplex times, got {}",
            t_nodes.len()
        ));
    }
    let horizon = spec.horizon;
    if n == 0 {
        return cond_exp_heat(&spec.payoff, 0.0, spec.start, horizon);
    }
    let mut prev = 0.0;
    for &t in t_nodes {
        if !(t > prev) || !(t < horizon) {
            return domain(format!(
                "simplex times must satisfy 0 < t_1 < … < t_n < T, got {t_nodes:?}"
            ));
        }
        prev = t;
    }
    let innermost_t = t_nodes[n - 1];
    let payoff = &spec.payoff;
    let mut level: Box<dyn Fn(f64) -> f64 + '_> =
        Box::new(move |w| cond_exp_deriv(payoff, innermost_t, w, horizon).unwrap_or(f64::NAN));
    for k in (0..n - 1).rev() {
        let tau = t_nodes[k + 1] - t_nodes[k];
        let inner = level;
        level = Box::new(move |w| heat_semigroup_dx(quad, &inner, tau, w));
    }
    let g = heat_semigroup(quad, &level, t_nodes[0], spec.start);
    if !g.is_finite() {
        return domain("nested conditional expectation did not produce a finite value");
    }
    Ok(g)
}

/// Running iterated integrals `I^{(0)}, …, I^{(n)}` along a path, updated by
/// `I^{(k)} += I^{(k-1)} ΔW` with left-endpoint values.
#[derive(Debug, Clone, PartialEq)]
pub struct IteratedIntegralState {
    pub values: Vec<f64>,
}

impl IteratedIntegralState {
    pub fn new(c: f64, order: usize) -> Self {
        let mut values = vec![0.0; order + 1];
        values[0] = c;
        IteratedIntegralState { values }
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn advance(&mut self, dw: f64) {
        // descending so every update reads the left-endpoint value
        for k in (1..self.values.len()).rev() {
            self.values[k] += self.values[k - 1] * dw;
        }
    }

    pub fn run(c: f64, order: usize, w: &SamplePath) -> Self {
        let mut state = IteratedIntegralState::new(c, order);
        for pair in w.values.windows(2) {
            state.advance(pair[1] - pair[0]);
        }
        state
    }
}

/// `J_n(c) = ∫_{S_n} c dW_{t_1} … dW_{t_n}` at `T`.
pub fn iterated_integral_const(c: f64, n: usize, w: &SamplePath) -> Result<f64> {
    if n > HARD_MAX_ORDER {
        return Err(QcdError::UnsupportedOrder {
            order: n,
            max: HARD_MAX_ORDER,
        });
    }
    Ok(IteratedIntegralState::run(c, n, w).values[n])
}

/// `g_0 + Σ_{n=1}^{order} J_n(g_n)` along `w`.
pub fn truncated_chaos(coeffs: &ChaosCoefficients, w: &SamplePath) -> f64 {
    truncated_chaos_partials(coeffs, w)[coeffs.order]
}

/// Partial sums `g_0 + Σ_{n<=m} J_n(g_n)` for every `m = 0..=order` from a
/// single pass.
pub fn truncated_chaos_partials(coeffs: &ChaosCoefficients, w: &SamplePath) -> Vec<f64> {
    let unit = IteratedIntegralState::run(1.0, coeffs.order, w);
    let mut out = Vec::with_capacity(coeffs.order + 1);
    let mut acc = coeffs.g[0];
    out.push(acc);
    for n in 1..=coeffs.order {
        acc += coeffs.g[n] * unit.values[n];
        out.push(acc);
    }
    out
}

/// `(g_0² + Σ_{n=1}^{order} g_n² Tⁿ/n!, Φ((x-K)/√T))`.
pub fn norm_identity(coeffs: &ChaosCoefficients, order: usize) -> Result<(f64, f64)> {
    Ok((
        *norm_partial_sums(coeffs, order)?.last().unwrap(),
        coeffs.target_norm(),
    ))
}

/// Every partial sum of the norm series through `order`.
pub fn norm_partial_sums(coeffs: &ChaosCoefficients, order: usize) -> Result<Vec<f64>> {
    if order > coeffs.order {
        return invalid(format!(
            "requested {order} terms from coefficients of order {}",
            coeffs.order
        ));
    }
    let mut out = Vec::with_capacity(order + 1);
    let mut acc = coeffs.g[0] * coeffs.g[0];
    out.push(acc);
    let mut volume = 1.0; // Tⁿ/n!
    for n in 1..=order {
        volume *= coeffs.horizon / n as f64;
        acc += coeffs.g[n] * coeffs.g[n] * volume;
        out.push(acc);
    }
    Ok(out)
}

/// `D^{(n)}_{W_t} E[1{W_T >= K} | F_t] = ∂ₓ^{n-1} p(T - t, W_t - K)`.
pub fn qcd_nth_derivative(n: usize, t: f64, w_t: f64, horizon: f64, strike: f64) -> Result<f64> {
    if n == 0 {
        return invalid("QCD order starts at 1");
    }
    if !(t < horizon) {
        return domain(format!("t = {t} must be < T = {horizon}"));
    }
    density_dx_capped(n - 1, horizon - t, w_t, strike, DEFAULT_MAX_ORDER)
}
