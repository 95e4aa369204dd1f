//! Martingale representation of `F = f(W_T)` with the QCD integrand
//! `D_{W_t} E[F | F_t]`, reconstructed pathwise as `E[F] + ∫ integrand dW`,
//! plus the change-of-measure variant for the Brownian indicator.
//!
//! Near expiry the indicator integrand `p(T-t, W_t - K)` blows up when
//! `W_t` sits at the strike, so integrands are frozen on `(T - ε, T]` at their
//! value on the last grid node not later than `T - ε`.

use serde::{Deserialize, Serialize};

use crate::deterministic::DeterministicFn;
use crate::error::{QcdError, Result};
use crate::heat_kernel::{density, normal_cdf};
use crate::ito::{
    bayes_reweight, cond_exp_deriv, cond_exp_heat, stochastic_exponential, IntegrandPath,
};
use crate::paths::{shift_path, PathEnsemble, SamplePath, TimeGrid};
use crate::payoff::{Payoff, PayoffSpec};
use crate::stats::{pairwise_sum, MeanEstimate};

/// Default cutoff as a fraction of the horizon.
pub const DEFAULT_CUTOFF_FRACTION: f64 = 1e-4;

pub fn default_cutoff(horizon: f64) -> f64 {
    DEFAULT_CUTOFF_FRACTION * horizon
}

pub(crate) fn check_cutoff(t: f64, horizon: f64, eps: f64) -> Result<()> {
    if !(eps > 0.0) || eps >= horizon {
        return Err(QcdError::InvalidArgument(format!(
            "cutoff must lie in (0, T), got {eps}"
        )));
    }
    let limit = horizon - eps;
    if t > limit + 1e-14 * horizon {
        return Err(QcdError::Cutoff { t, limit });
    }
    Ok(())
}

/// Index of the last node with `t_i <= T - ε`.
pub fn freeze_index(grid: &TimeGrid, eps: f64) -> usize {
    let limit = grid.horizon() - eps;
    let mut j = grid.index_at_or_before(limit).min(grid.steps() - 1);
    while j > 0 && grid.node(j) > limit {
        j -= 1;
    }
    j
}

/// `E[F]` in closed form (indicator, polynomial) or by quadrature.
pub fn expected_payoff(spec: &PayoffSpec) -> Result<f64> {
    cond_exp_heat(&spec.payoff, 0.0, spec.start, spec.horizon)
}

/// `D_{W_t} E[F | F_t]` at `W_t = w_t`.
pub fn integrand(spec: &PayoffSpec, t: f64, w_t: f64, eps: f64) -> Result<f64> {
    check_cutoff(t, spec.horizon, eps)?;
    match spec.payoff {
        Payoff::Indicator { strike } => density(spec.horizon - t, w_t - strike, 0.0),
        ref other => cond_exp_deriv(other, t, w_t, spec.horizon),
    }
}

/// `D_{W~_t} Ẽ[F | F_t] = p(T - t, W_t - ∫_t^T λ - K)` for the indicator.
pub fn integrand_com(
    spec: &PayoffSpec,
    lambda: &DeterministicFn,
    t: f64,
    w_t: f64,
    eps: f64,
) -> Result<f64> {
    check_cutoff(t, spec.horizon, eps)?;
    let strike = indicator_strike(spec)?;
    lambda.validate_on(spec.horizon)?;
    let shift = lambda.integral(t, spec.horizon);
    density(spec.horizon - t, (w_t - shift) - strike, 0.0)
}

fn indicator_strike(spec: &PayoffSpec) -> Result<f64> {
    spec.payoff.strike().ok_or_else(|| {
        QcdError::Unsupported(format!(
            "change-of-measure representation is implemented for the indicator only, got {}",
            spec.payoff
        ))
    })
}

/// `Ẽ[F] = Φ((x - ∫_0^T λ - K)/√T)` for the indicator.
pub fn expected_payoff_com(spec: &PayoffSpec, lambda: &DeterministicFn) -> Result<f64> {
    let strike = indicator_strike(spec)?;
    let shift = lambda.integral(0.0, spec.horizon);
    Ok(normal_cdf(
        ((spec.start - shift) - strike) / spec.horizon.sqrt(),
    ))
}

fn frozen_integrand(
    w: &SamplePath,
    eps: f64,
    eval: impl Fn(f64, f64) -> Result<f64>,
) -> Result<IntegrandPath> {
    let grid = w.grid;
    let freeze = freeze_index(&grid, eps);
    let mut values = Vec::with_capacity(grid.steps());
    for i in 0..=freeze {
        values.push(eval(grid.node(i), w.values[i])?);
    }
    let frozen = values[freeze];
    values.resize(grid.steps(), frozen);
    IntegrandPath::new(grid, values)
}

/// Integrand path along `w`, frozen after the cutoff.
pub fn integrand_path(spec: &PayoffSpec, w: &SamplePath, eps: f64) -> Result<IntegrandPath> {
    frozen_integrand(w, eps, |t, x| integrand(spec, t, x, eps))
}

pub fn integrand_path_com(
    spec: &PayoffSpec,
    lambda: &DeterministicFn,
    w: &SamplePath,
    eps: f64,
) -> Result<IntegrandPath> {
    frozen_integrand(w, eps, |t, x| integrand_com(spec, lambda, t, x, eps))
}

fn left_sum(x: &IntegrandPath, driver: &SamplePath) -> f64 {
    let mut acc = 0.0;
    for (j, &xj) in x.values.iter().enumerate() {
        acc += xj * (driver.values[j + 1] - driver.values[j]);
    }
    acc
}

fn check_path(spec: &PayoffSpec, w: &SamplePath) -> Result<()> {
    if (w.grid.horizon() - spec.horizon).abs() > 1e-12 * spec.horizon {
        return Err(QcdError::InvalidArgument(format!(
            "path horizon {} differs from payoff horizon {}",
            w.grid.horizon(),
            spec.horizon
        )));
    }
    Ok(())
}

/// `E[F] + ∫_0^T D_{W_t} E[F | F_t] dW_t` along one path.
pub fn reconstruct(spec: &PayoffSpec, w: &SamplePath, eps: f64) -> Result<f64> {
    check_path(spec, w)?;
    let x = integrand_path(spec, w, eps)?;
    Ok(expected_payoff(spec)? + left_sum(&x, w))
}

/// `Ẽ[F] + ∫_0^T D_{W~_t} Ẽ[F | F_t] dW~_t` along one path.
pub fn reconstruct_com(
    spec: &PayoffSpec,
    lambda: &DeterministicFn,
    w: &SamplePath,
    eps: f64,
) -> Result<f64> {
    check_path(spec, w)?;
    let w_tilde = shift_path(w, lambda)?;
    let x = integrand_path_com(spec, lambda, w, eps)?;
    Ok(expected_payoff_com(spec, lambda)? + left_sum(&x, &w_tilde))
}

/// Ensemble-level outcome of a representation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationReport {
    /// Sample estimate of `E[F]` (or `Ẽ[F]` via Bayes reweighting).
    #[serde(rename = "e_F")]
    pub e_f: f64,
    #[serde(rename = "e_F_se")]
    pub e_f_se: f64,
    #[serde(rename = "e_F_closed_form")]
    pub e_f_closed_form: f64,
    /// Mean of the reconstructions (the Itô part has mean zero under the
    /// measure the integral is a martingale for).
    pub reconstruction_mean: f64,
    pub l2_error: f64,
    pub max_error: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    #[serde(rename = "M")]
    pub paths: usize,
    pub eps: f64,
    pub seed: u64,
    #[serde(skip)]
    pub payoffs: Vec<f64>,
    #[serde(skip)]
    pub reconstructions: Vec<f64>,
}

impl RepresentationReport {
    fn assemble(
        ens: &PathEnsemble,
        eps: f64,
        e_f: MeanEstimate,
        e_f_closed_form: f64,
        payoffs: Vec<f64>,
        reconstructions: Vec<f64>,
    ) -> Self {
        let sq: Vec<f64> = payoffs
            .iter()
            .zip(&reconstructions)
            .map(|(f, r)| (f - r) * (f - r))
            .collect();
        let max_error = sq.iter().fold(0.0_f64, |m, v| m.max(v.sqrt()));
        RepresentationReport {
            e_f: e_f.mean,
            e_f_se: e_f.se,
            e_f_closed_form,
            reconstruction_mean: pairwise_sum(&reconstructions) / reconstructions.len() as f64,
            l2_error: (pairwise_sum(&sq) / sq.len() as f64).sqrt(),
            max_error,
            steps: ens.grid.steps(),
            paths: ens.count,
            eps,
            seed: ens.seed,
            payoffs,
            reconstructions,
        }
    }
}

fn check_ensemble(spec: &PayoffSpec, ens: &PathEnsemble) -> Result<()> {
    if (ens.start - spec.start).abs() > 0.0 {
        return Err(QcdError::InvalidArgument(format!(
            "ensemble starts at {}, payoff spec at {}",
            ens.start, spec.start
        )));
    }
    Ok(())
}

/// Runs [`reconstruct`] over an ensemble.
pub fn verify_ensemble(
    spec: &PayoffSpec,
    ens: &PathEnsemble,
    eps: f64,
) -> Result<RepresentationReport> {
    check_ensemble(spec, ens)?;
    let pairs = ens.try_map_paths(|_, w| {
        Ok((
            spec.terminal_value(w.terminal()),
            reconstruct(spec, w, eps)?,
        ))
    })?;
    let (payoffs, recon): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let e_f = MeanEstimate::from_samples(&payoffs);
    Ok(RepresentationReport::assemble(
        ens,
        eps,
        e_f,
        expected_payoff(spec)?,
        payoffs,
        recon,
    ))
}

/// Runs [`reconstruct_com`] over an ensemble simulated under `P`; `Ẽ[F]`
/// is estimated by Bayes reweighting with `Z_T`.
pub fn verify_ensemble_com(
    spec: &PayoffSpec,
    lambda: &DeterministicFn,
    ens: &PathEnsemble,
    eps: f64,
) -> Result<RepresentationReport> {
    check_ensemble(spec, ens)?;
    let rows = ens.try_map_paths(|_, w| {
        let z = stochastic_exponential(lambda, w)?;
        Ok((
            spec.terminal_value(w.terminal()),
            reconstruct_com(spec, lambda, w, eps)?,
            z.terminal(),
        ))
    })?;
    let payoffs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let recon: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let zs: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let e_f = bayes_reweight(&payoffs, &zs)?;
    Ok(RepresentationReport::assemble(
        ens,
        eps,
        e_f,
        expected_payoff_com(spec, lambda)?,
        payoffs,
        recon,
    ))
}
