//! Itô integration on the grid, stochastic exponentials for deterministic
//! drifts, Bayes reweighting, and conditional expectations of `f(W_T)`
//! through the heat kernel.

use serde::{Deserialize, Serialize};

use crate::deterministic::DeterministicFn;
use crate::error::{domain, invalid, Result};
use crate::heat_kernel::{density, normal_cdf};
use crate::paths::{ensure_same_grid, shift_path, SamplePath, TimeGrid};
use crate::payoff::Payoff;
use crate::quadrature::GaussHermite;
use crate::stats::MeanEstimate;

/// Default bound on `Σ x_i² dt` above which an integrand is flagged.
pub const DEFAULT_EXPLOSION_BOUND: f64 = 1e8;

/// Integrand-class predicates evaluated on a discretised integrand.
///
/// On a grid every adapted integrand is progressive, so only finiteness and
/// the square-integrability proxy carry information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub finite: bool,
    pub square_integral: f64,
    pub square_integrable: bool,
}

impl Admissibility {
    pub fn admissible(&self) -> bool {
        self.finite && self.square_integrable
    }
}

/// Left-endpoint integrand values `x_{t_0}, …, x_{t_{N-1}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrandPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub admissibility: Admissibility,
}

impl IntegrandPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::with_bound(grid, values, DEFAULT_EXPLOSION_BOUND)
    }

    pub fn with_bound(grid: TimeGrid, values: Vec<f64>, explosion_bound: f64) -> Result<Self> {
        if values.len() != grid.steps() {
            return invalid(format!(
                "integrand has {} values, grid has {} steps",
                values.len(),
                grid.steps()
            ));
        }
        let finite = values.iter().all(|v| v.is_finite());
        let square_integral: f64 = values.iter().map(|v| v * v).sum::<f64>() * grid.dt();
        Ok(IntegrandPath {
            grid,
            values,
            admissibility: Admissibility {
                finite,
                square_integral,
                square_integrable: finite && square_integral <= explosion_bound,
            },
        })
    }

    /// Left-endpoint samples `f(i, t_i)` for `i < N`.
    pub fn from_nodes(grid: TimeGrid, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let values = (0..grid.steps()).map(|i| f(i, grid.node(i))).collect();
        IntegrandPath::new(grid, values)
    }

    pub fn constant(grid: TimeGrid, c: f64) -> Result<Self> {
        IntegrandPath::new(grid, vec![c; grid.steps()])
    }
}

/// Cumulative `Σ_{j<i} x_{t_j} (W_{t_{j+1}} - W_{t_j})`.
pub fn ito_integral(x: &IntegrandPath, w: &SamplePath) -> Result<SamplePath> {
    ensure_same_grid(&x.grid, &w.grid)?;
    if !x.admissibility.finite {
        return invalid("integrand has non-finite values");
    }
    let mut values = Vec::with_capacity(w.values.len());
    let mut acc = 0.0;
    values.push(acc);
    for (j, &xj) in x.values.iter().enumerate() {
        acc += xj * (w.values[j + 1] - w.values[j]);
        values.push(acc);
    }
    SamplePath::new(w.grid, values, "ito")
}

/// `Z_t = exp(-∫_0^t λ dW - ½ ∫_0^t λ² du)` with the `dW` integral as a
/// left-endpoint sum and the `λ²` integral in closed form.
pub fn stochastic_exponential(lambda: &DeterministicFn, w: &SamplePath) -> Result<SamplePath> {
    lambda.validate_on(w.grid.horizon())?;
    let grid = w.grid;
    let mut values = Vec::with_capacity(w.values.len());
    let mut stoch = 0.0;
    values.push(1.0);
    for j in 0..grid.steps() {
        stoch += lambda.eval(grid.node(j)) * (w.values[j + 1] - w.values[j]);
        let t = grid.node(j + 1);
        values.push((-stoch - 0.5 * lambda.square_integral(0.0, t)).exp());
    }
    SamplePath::new(grid, values, "Z")
}

/// Girsanov data for one path: `Z`, `Λ = 1/Z`, and `W~ = W + ∫λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GirsanovSpec {
    pub lambda: DeterministicFn,
    pub z: SamplePath,
    pub z_inverse: SamplePath,
    pub w_tilde: SamplePath,
}

impl GirsanovSpec {
    /// Builds the change of measure along `w`. Deterministic bounded `λ`
    /// satisfies Novikov's condition, so only boundedness is checked.
    pub fn new(lambda: DeterministicFn, w: &SamplePath) -> Result<Self> {
        let sup = lambda.sup_abs(w.grid.horizon());
        if !sup.is_finite() {
            return invalid(format!("{lambda} is unbounded on [0, T]"));
        }
        let z = stochastic_exponential(&lambda, w)?;
        let inv: Vec<f64> = z.values.iter().map(|v| 1.0 / v).collect();
        Ok(GirsanovSpec {
            lambda,
            z_inverse: SamplePath::new(w.grid, inv, "Lambda")?,
            w_tilde: shift_path(w, &lambda)?,
            z,
        })
    }
}

/// `Ẽ[F] ≈ mean(F · Z_T)` over a sample drawn under `P`.
pub fn bayes_reweight(f_samples: &[f64], z_terminal: &[f64]) -> Result<MeanEstimate> {
    if f_samples.len() != z_terminal.len() {
        return invalid(format!(
            "{} payoff samples vs {} density samples",
            f_samples.len(),
            z_terminal.len()
        ));
    }
    if f_samples.is_empty() {
        return invalid("no samples");
    }
    let weighted: Vec<f64> = f_samples
        .iter()
        .zip(z_terminal)
        .map(|(f, z)| f * z)
        .collect();
    Ok(MeanEstimate::from_samples(&weighted))
}

fn time_to_go(t: f64, horizon: f64) -> Result<f64> {
    if !(t < horizon) || !t.is_finite() {
        return domain(format!("conditioning time {t} must be < T = {horizon}"));
    }
    if t < 0.0 {
        return domain(format!("conditioning time {t} must be >= 0"));
    }
    Ok(horizon - t)
}

/// `E[g(x + √τ Z)]`.
pub fn heat_semigroup(quad: &GaussHermite, g: impl Fn(f64) -> f64, tau: f64, x: f64) -> f64 {
    let s = tau.sqrt();
    quad.expectation(|z| g(x + s * z))
}

/// `∂ₓ E[g(x + √τ Z)] = E[g(x + √τ Z) Z] / √τ`, i.e. `∫ g(y) ∂ₓp(τ, x, y) dy`.
pub fn heat_semigroup_dx(quad: &GaussHermite, g: impl Fn(f64) -> f64, tau: f64, x: f64) -> f64 {
    let s = tau.sqrt();
    quad.expectation(|z| g(x + s * z) * z) / s
}

/// `E[(x + s Z)^k]` summed against polynomial coefficients.
fn polynomial_heat(coeffs: &[f64], tau: f64, x: f64) -> f64 {
    // moments E[Z^j]: 1, 0, 1, 0, 3, 0, 15, ...
    let deg = coeffs.len();
    let mut moments = vec![0.0; deg];
    if deg > 0 {
        moments[0] = 1.0;
    }
    for j in 2..deg {
        moments[j] = (j - 1) as f64 * moments[j - 2];
    }
    let s = tau.sqrt();
    let mut total = 0.0;
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        // Σ_j C(k, j) x^{k-j} s^j E[Z^j]
        let mut binom = 1.0;
        let mut term = 0.0;
        for (j, &mj) in moments.iter().enumerate().take(k + 1) {
            if j > 0 {
                binom = binom * (k - j + 1) as f64 / j as f64;
            }
            if j % 2 == 0 {
                term += binom * x.powi((k - j) as i32) * s.powi(j as i32) * mj;
            }
        }
        total += c * term;
    }
    total
}

/// `v(t, x) = E[f(W_T) | W_t = x] = ∫ f(y) p(T - t, x, y) dy`.
pub fn cond_exp_heat(f: &Payoff, t: f64, x: f64, horizon: f64) -> Result<f64> {
    cond_exp_heat_with(GaussHermite::standard(), f, t, x, horizon)
}

pub fn cond_exp_heat_with(
    quad: &GaussHermite,
    f: &Payoff,
    t: f64,
    x: f64,
    horizon: f64,
) -> Result<f64> {
    let tau = time_to_go(t, horizon)?;
    Ok(match f {
        Payoff::Indicator { strike } => normal_cdf((x - strike) / tau.sqrt()),
        Payoff::Polynomial { coeffs } => polynomial_heat(coeffs, tau, x),
        other => heat_semigroup(quad, |y| other.eval(y), tau, x),
    })
}

/// `∂ₓ v(t, x)`; the QCD of the martingale `E[f(W_T) | F_t]` at `W_t = x`.
pub fn cond_exp_deriv(f: &Payoff, t: f64, x: f64, horizon: f64) -> Result<f64> {
    cond_exp_deriv_with(GaussHermite::standard(), f, t, x, horizon)
}

pub fn cond_exp_deriv_with(
    quad: &GaussHermite,
    f: &Payoff,
    t: f64,
    x: f64,
    horizon: f64,
) -> Result<f64> {
    let tau = time_to_go(t, horizon)?;
    match f {
        Payoff::Indicator { strike } => density(tau, x - strike, 0.0),
        other => Ok(heat_semigroup_dx(quad, |y| other.eval(y), tau, x)),
    }
}
