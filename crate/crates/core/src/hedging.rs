//! Replication of the digital claim `V_T = 1{W_T >= K}` in a one-stock market
//! `dP = b P dt + a P dW` with deterministic rate `r`.
//!
//! With `λ = (b - r)/a` and `D_t = exp(-∫_0^t r)`, the holding in the stock is
//!
//! ```text
//! Δ_t = e^{-∫_t^T r} a_t⁻¹ P_t⁻¹ p(T - t, W_t - ∫_t^T λ - K)
//! ```
//!
//! and the discounted wealth evolves as `d(DX) = Δ a D P dW~`.

use serde::{Deserialize, Serialize};

use crate::clark_ocone::{check_cutoff, freeze_index};
use crate::deterministic::DeterministicFn;
use crate::error::{domain, invalid, Result};
use crate::heat_kernel::{density, normal_cdf};
use crate::ito::{bayes_reweight, stochastic_exponential};
use crate::paths::{shift_path, PathEnsemble, SamplePath};
use crate::stats::{quantile, rms, MeanEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub b: DeterministicFn,
    pub a: DeterministicFn,
    pub r: DeterministicFn,
    pub strike: f64,
    pub horizon: f64,
    pub p0: f64,
    /// `W_0`.
    pub start: f64,
}

fn affine_parts(f: &DeterministicFn, name: &str) -> Result<(f64, f64)> {
    match *f {
        DeterministicFn::Const(c) => Ok((c, 0.0)),
        DeterministicFn::Linear { intercept, slope } => Ok((intercept, slope)),
        DeterministicFn::AffineRatio { .. } => {
            invalid(format!("{name} must be constant or linear, got {f}"))
        }
    }
}

impl MarketSpec {
    pub fn new(
        b: DeterministicFn,
        a: DeterministicFn,
        r: DeterministicFn,
        strike: f64,
        horizon: f64,
        p0: f64,
        start: f64,
    ) -> Result<Self> {
        let mkt = MarketSpec {
            b,
            a,
            r,
            strike,
            horizon,
            p0,
            start,
        };
        mkt.validate()?;
        Ok(mkt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return invalid(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.strike > 0.0) || !self.strike.is_finite() {
            return invalid(format!("strike must be positive, got {}", self.strike));
        }
        if !(self.p0 > 0.0) || !self.p0.is_finite() {
            return invalid(format!(
                "initial stock price must be positive, got {}",
                self.p0
            ));
        }
        if !self.start.is_finite() {
            return invalid("start point must be finite");
        }
        for (f, name) in [(&self.b, "b"), (&self.a, "a"), (&self.r, "r")] {
            let (c0, c1) = affine_parts(f, name)?;
            if !c0.is_finite() || !c1.is_finite() {
                return invalid(format!("{name} has non-finite parameters"));
            }
        }
        // linear a: the endpoints bound |a| from below
        let (a0, a1) = (self.a.eval(0.0), self.a.eval(self.horizon));
        if a0 == 0.0 || a1 == 0.0 || a0.signum() != a1.signum() {
            return invalid(format!(
                "volatility {} vanishes on [0, {}]",
                self.a, self.horizon
            ));
        }
        Ok(())
    }

    /// `λ = (b - r)/a` as a deterministic function.
    pub fn lambda(&self) -> DeterministicFn {
        let (b0, b1) = affine_parts(&self.b, "b").expect("validated market");
        let (r0, r1) = affine_parts(&self.r, "r").expect("validated market");
        let (n0, n1) = (b0 - r0, b1 - r1);
        match self.a {
            DeterministicFn::Const(c) if n1 == 0.0 => DeterministicFn::Const(n0 / c),
            DeterministicFn::Const(c) => DeterministicFn::Linear {
                intercept: n0 / c,
                slope: n1 / c,
            },
            DeterministicFn::Linear { intercept, slope } => DeterministicFn::AffineRatio {
                n0,
                n1,
                d0: intercept,
                d1: slope,
            },
            DeterministicFn::AffineRatio { .. } => unreachable!("validated market"),
        }
    }

    /// `D_t = exp(-∫_0^t r)`.
    pub fn discount(&self, t: f64) -> f64 {
        (-self.r.integral(0.0, t)).exp()
    }

    /// `D_0 X_0 = Ẽ[D_T V_T] = e^{-∫_0^T r} Φ((x - ∫_0^T λ - K)/√T)`.
    pub fn discounted_price(&self) -> f64 {
        let shift = self.lambda().integral(0.0, self.horizon);
        self.discount(self.horizon)
            * normal_cdf(((self.start - shift) - self.strike) / self.horizon.sqrt())
    }

    pub fn payoff(&self, w_terminal: f64) -> f64 {
        if w_terminal >= self.strike {
            1.0
        } else {
            0.0
        }
    }
}

/// `(b(t) - r(t)) / a(t)`.
pub fn market_price_of_risk(mkt: &MarketSpec, t: f64) -> Result<f64> {
    let a = mkt.a.eval(t);
    if a == 0.0 {
        return domain(format!("volatility vanishes at t = {t}"));
    }
    Ok((mkt.b.eval(t) - mkt.r.eval(t)) / a)
}

/// Log-Euler stock path driven by `w`, coefficients frozen at the left node.
pub fn simulate_stock(mkt: &MarketSpec, w: &SamplePath) -> Result<SamplePath> {
    let grid = w.grid;
    let dt = grid.dt();
    let mut values = Vec::with_capacity(w.values.len());
    let mut log_p = mkt.p0.ln();
    values.push(mkt.p0);
    for i in 0..grid.steps() {
        let t = grid.node(i);
        let (b, a) = (mkt.b.eval(t), mkt.a.eval(t));
        log_p += (b - 0.5 * a * a) * dt + a * (w.values[i + 1] - w.values[i]);
        values.push(log_p.exp());
    }
    SamplePath::new(grid, values, "P")
}

/// Stock holding `Δ_t` of the replicating portfolio.
pub fn delta_digital(mkt: &MarketSpec, t: f64, w_t: f64, p_t: f64, eps: f64) -> Result<f64> {
    check_cutoff(t, mkt.horizon, eps)?;
    if !(p_t > 0.0) {
        return domain(format!("stock price must be positive, got {p_t}"));
    }
    let a = mkt.a.eval(t);
    if a == 0.0 {
        return domain(format!("volatility vanishes at t = {t}"));
    }
    let shift = mkt.lambda().integral(t, mkt.horizon);
    let growth = (-mkt.r.integral(t, mkt.horizon)).exp();
    Ok(growth / (a * p_t) * density(mkt.horizon - t, (w_t - shift) - mkt.strike, 0.0)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HedgeMode {
    Replicate,
    /// Holds nothing; isolates the initial-capital term.
    NoTrade,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeRun {
    pub stock: SamplePath,
    pub portfolio: SamplePath,
    /// Holding over `[t_i, t_{i+1})`, one per step.
    pub delta: Vec<f64>,
    pub discount: Vec<f64>,
    pub payoff: f64,
    pub initial_capital: f64,
    pub terminal_error: f64,
}

impl HedgeRun {
    pub fn discounted_terminal_wealth(&self) -> f64 {
        self.discount.last().unwrap() * self.portfolio.terminal()
    }
}

pub fn run_hedge(
    mkt: &MarketSpec,
    w: &SamplePath,
    rebalance_every: usize,
    eps: f64,
) -> Result<HedgeRun> {
    run_hedge_with(mkt, w, rebalance_every, eps, HedgeMode::Replicate)
}

pub fn run_hedge_with(
    mkt: &MarketSpec,
    w: &SamplePath,
    rebalance_every: usize,
    eps: f64,
    mode: HedgeMode,
) -> Result<HedgeRun> {
    mkt.validate()?;
    let grid = w.grid;
    if (grid.horizon() - mkt.horizon).abs() > 1e-12 * mkt.horizon {
        return invalid(format!(
            "path horizon {} differs from market horizon {}",
            grid.horizon(),
            mkt.horizon
        ));
    }
    if w.initial() != mkt.start {
        return invalid(format!(
            "path starts at {}, market at {}",
            w.initial(),
            mkt.start
        ));
    }
    if rebalance_every == 0 || !grid.steps().is_multiple_of(rebalance_every) {
        return invalid(format!(
            "rebalancing every {rebalance_every} steps is not a sub-grid of {} steps",
            grid.steps()
        ));
    }
    check_cutoff(0.0, mkt.horizon, eps)?;
    let lambda = mkt.lambda();
    let stock = simulate_stock(mkt, w)?;
    let w_tilde = shift_path(w, &lambda)?;
    let discount: Vec<f64> = (0..=grid.steps())
        .map(|i| mkt.discount(grid.node(i)))
        .collect();
    let freeze = freeze_index(&grid, eps);

    let d0x0 = mkt.discounted_price();
    let mut dx = d0x0;
    let mut wealth = Vec::with_capacity(grid.steps() + 1);
    wealth.push(dx / discount[0]);
    let mut delta = Vec::with_capacity(grid.steps());
    let mut hold = 0.0;
    for i in 0..grid.steps() {
        let t = grid.node(i);
        if mode == HedgeMode::Replicate && i % rebalance_every == 0 && i <= freeze {
            hold = delta_digital(mkt, t, w.values[i], stock.values[i], eps)?;
        }
        delta.push(hold);
        dx += hold
            * mkt.a.eval(t)
            * discount[i]
            * stock.values[i]
            * (w_tilde.values[i + 1] - w_tilde.values[i]);
        wealth.push(dx / discount[i + 1]);
    }
    let payoff = mkt.payoff(w.terminal());
    let d_t = discount[grid.steps()];
    Ok(HedgeRun {
        portfolio: SamplePath::new(grid, wealth, "X")?,
        stock,
        delta,
        payoff,
        initial_capital: d0x0 / discount[0],
        terminal_error: dx - d_t * payoff,
        discount,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeRow {
    /// Rebalances per horizon.
    pub frequency: usize,
    pub l2_error: f64,
    pub q95_error: f64,
    /// `Ẽ[terminal error]`, reweighted from `P`.
    pub mean_error: f64,
    pub mean_error_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeReport {
    pub rows: Vec<HedgeRow>,
    pub discounted_price: f64,
    /// `Ẽ[D_T V_T]` estimated by reweighting.
    pub reweighted_price: f64,
    pub reweighted_price_se: f64,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub eps: f64,
}

pub fn hedge_report(
    mkt: &MarketSpec,
    ens: &PathEnsemble,
    frequencies: &[usize],
    eps: f64,
) -> Result<HedgeReport> {
    mkt.validate()?;
    if frequencies.is_empty() {
        return invalid("no rebalancing frequencies");
    }
    let steps = ens.grid.steps();
    let mut every = Vec::with_capacity(frequencies.len());
    for &f in frequencies {
        if f == 0 || f > steps || !steps.is_multiple_of(f) {
            return invalid(format!("frequency {f} does not divide {steps} steps"));
        }
        every.push(steps / f);
    }
    let lambda = mkt.lambda();
    let d_t = mkt.discount(mkt.horizon);
    // per path: Z_T, D_T V_T, then one terminal error per frequency
    let per_path = ens.try_map_paths(|_, w| {
        let z = stochastic_exponential(&lambda, w)?.terminal();
        let errors = every
            .iter()
            .map(|&m| run_hedge(mkt, w, m, eps).map(|run| run.terminal_error))
            .collect::<Result<Vec<_>>>()?;
        Ok((z, d_t * mkt.payoff(w.terminal()), errors))
    })?;
    let z: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let claims: Vec<f64> = per_path.iter().map(|p| p.1).collect();
    let price = bayes_reweight(&claims, &z)?;
    let mut rows = Vec::with_capacity(frequencies.len());
    for (j, &f) in frequencies.iter().enumerate() {
        let errors: Vec<f64> = per_path.iter().map(|p| p.2[j]).collect();
        let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
        let tilde: MeanEstimate = bayes_reweight(&errors, &z)?;
        rows.push(HedgeRow {
            frequency: f,
            l2_error: rms(&errors),
            q95_error: quantile(&abs, 0.95),
            mean_error: tilde.mean,
            mean_error_se: tilde.se,
        });
    }
    Ok(HedgeReport {
        rows,
        discounted_price: mkt.discounted_price(),
        reweighted_price: price.mean,
        reweighted_price_se: price.se,
        paths: ens.count,
        steps,
        seed: ens.seed,
        eps,
    })
}
