use serde_json::{json, Map, Value};

use qcd::chaos::{norm_partial_sums, truncated_chaos_partials, ChaosCoefficients};
use qcd::clark_ocone::{verify_ensemble, verify_ensemble_com};
use qcd::deterministic::DeterministicFn;
use qcd::error::QcdError;
use qcd::heat_kernel::{
    density_dx, density_dx_expanded, heat_equation_residual, DEFAULT_MAX_ORDER,
};
use qcd::hedging::{hedge_report, MarketSpec};
use qcd::ito::{
    bayes_reweight, cond_exp_heat, ito_integral, stochastic_exponential, IntegrandPath,
};
use qcd::paths::{
    make_uniform_grid, shift_path, simulate_brownian, PathEnsemble, SamplePath, TimeGrid,
};
use qcd::payoff::PayoffSpec;
use qcd::qcov::{qcd_profile, QcdEstimatorConfig};
use qcd::stats::{pairwise_sum, MeanEstimate};

use crate::config::{
    ChaosKnobs, ClarkOconeKnobs, GirsanovKnobs, HeatCheckKnobs, HedgeKnobs, PathsKnobs,
    VerifyQcdKnobs,
};
use crate::output::{Cell, Table};
use crate::{runtime, validation, CliError, Report};

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("reports are objects"),
    }
}

fn ensemble(
    horizon: f64,
    steps: usize,
    paths: usize,
    seed: u64,
    start: f64,
) -> Result<PathEnsemble, CliError> {
    let grid = make_uniform_grid(horizon, steps).map_err(validation)?;
    simulate_brownian(grid, paths, seed, start).map_err(validation)
}

fn check_eps(eps: f64, horizon: f64) -> Result<(), CliError> {
    if !(eps > 0.0) || eps >= horizon {
        return Err(CliError::Validation(format!(
            "--eps must lie in (0, T), got {eps}"
        )));
    }
    Ok(())
}

/// Column means over per-path rows, reduced pairwise.
fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let width = rows[0].len();
    (0..width)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            pairwise_sum(&col) / col.len() as f64
        })
        .collect()
}

pub fn paths(k: &PathsKnobs) -> Result<Report, CliError> {
    let ens = ensemble(
        k.horizon.unwrap(),
        k.steps.unwrap(),
        k.paths.unwrap(),
        k.seed.unwrap(),
        k.start.unwrap(),
    )?;
    let nodes = ens.grid.nodes();
    let paths = ens.materialize();
    let mut table = Table::new(vec!["path_id", "t", "value"]);
    for (id, p) in paths.iter().enumerate() {
        for (t, v) in nodes.iter().zip(&p.values) {
            table.push(vec![Cell::from(id), Cell::from(*t), Cell::from(*v)]);
        }
    }
    let values: Vec<&Vec<f64>> = paths.iter().map(|p| &p.values).collect();
    Ok(Report {
        json: object(json!({ "t": nodes, "paths": values })),
        table: Some(table),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Process {
    W,
    Drift(f64),
    ItoU,
    Scaled(f64),
}

impl Process {
    fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || {
            CliError::Validation(format!(
                "unknown process {s:?}; use w, drift:c, ito-u or scaled:s"
            ))
        };
        let number = |p: &str| {
            p.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(bad)
        };
        match s.split_once(':') {
            None if s == "w" => Ok(Process::W),
            None if s == "ito-u" => Ok(Process::ItoU),
            Some(("drift", p)) => Ok(Process::Drift(number(p)?)),
            Some(("scaled", p)) => Ok(Process::Scaled(number(p)?)),
            _ => Err(bad()),
        }
    }

    fn build(&self, w: &SamplePath) -> qcd::error::Result<SamplePath> {
        let grid = w.grid;
        match *self {
            Process::W => Ok(w.clone()),
            Process::Drift(c) => SamplePath::from_fn(grid, "S", |t| c * t),
            Process::ItoU => ito_integral(&IntegrandPath::from_nodes(grid, |_, t| t)?, w),
            Process::Scaled(s) => w.combine(s, w, 0.0, "S"),
        }
    }

    /// `d<S, W>/dt`.
    fn target(&self, t: f64) -> f64 {
        match *self {
            Process::W => 1.0,
            Process::Drift(_) => 0.0,
            Process::ItoU => t,
            Process::Scaled(s) => s,
        }
    }
}

pub fn verify_qcd(k: &VerifyQcdKnobs) -> Result<Report, CliError> {
    let process = Process::parse(k.process.as_deref().unwrap())?;
    let ens = ensemble(
        k.horizon.unwrap(),
        k.steps.unwrap(),
        k.paths.unwrap(),
        k.seed.unwrap(),
        k.start.unwrap(),
    )?;
    let grid: TimeGrid = ens.grid;
    let half_width = k.window_k.unwrap();
    let cfg = QcdEstimatorConfig {
        window_h: half_width as f64 * grid.dt(),
        half_width,
    };
    cfg.validate(&grid).map_err(validation)?;
    let profiles = ens
        .try_map_paths(|_, w| {
            let s = process.build(w)?;
            qcd_profile(&s, w, &cfg)
        })
        .map_err(runtime)?;
    let flagged = profiles[0].flagged.clone();
    let rows: Vec<Vec<f64>> = profiles.into_iter().map(|p| p.path.values).collect();
    let estimate = column_means(&rows);
    let mut table = Table::new(vec!["t", "estimate", "target", "abs_error"]);
    let mut sq = Vec::new();
    for (i, est) in estimate.iter().enumerate() {
        if flagged[i] {
            continue;
        }
        let t = grid.node(i);
        let target = process.target(t);
        let err = (est - target).abs();
        sq.push(err * err);
        table.push(vec![
            Cell::from(t),
            Cell::from(*est),
            Cell::from(target),
            Cell::from(err),
        ]);
    }
    let mut json = object(table.to_json_columns());
    json.insert(
        "rms_error".into(),
        json!((pairwise_sum(&sq) / sq.len() as f64).sqrt()),
    );
    Ok(Report {
        json,
        table: Some(table),
    })
}

pub fn clark_ocone(k: &ClarkOconeKnobs) -> Result<Report, CliError> {
    let payoff = k.payoff.clone().unwrap();
    let horizon = k.horizon.unwrap();
    let eps = k.eps.unwrap();
    check_eps(eps, horizon)?;
    let spec = PayoffSpec::new(payoff, horizon, k.start.unwrap()).map_err(validation)?;
    if k.lambda.is_some() && !spec.payoff.is_indicator() {
        return Err(CliError::Validation(
            "--lambda is supported for indicator payoffs only".into(),
        ));
    }
    if let Some(l) = &k.lambda {
        l.validate_on(horizon).map_err(validation)?;
    }
    let ens = ensemble(
        horizon,
        k.steps.unwrap(),
        k.paths.unwrap(),
        k.seed.unwrap(),
        spec.start,
    )?;
    let report = match &k.lambda {
        None => verify_ensemble(&spec, &ens, eps),
        Some(l) => verify_ensemble_com(&spec, l, &ens, eps),
    }
    .map_err(runtime)?;
    let mut table = Table::new(vec!["path_id", "payoff", "reconstruction", "error"]);
    for (i, (f, r)) in report
        .payoffs
        .iter()
        .zip(&report.reconstructions)
        .enumerate()
    {
        table.push(vec![
            Cell::from(i),
            Cell::from(*f),
            Cell::from(*r),
            Cell::from(r - f),
        ]);
    }
    let mut json = object(serde_json::to_value(&report).map_err(runtime)?);
    json.insert(
        "measure".into(),
        json!(if k.lambda.is_some() { "tilde" } else { "P" }),
    );
    Ok(Report {
        json,
        table: Some(table),
    })
}

pub fn chaos(k: &ChaosKnobs) -> Result<Report, CliError> {
    let (horizon, start, strike) = (k.horizon.unwrap(), k.start.unwrap(), k.strike.unwrap());
    let order = k.truncate.unwrap();
    let coeffs = match &k.lambda {
        None => ChaosCoefficients::indicator(horizon, start, strike, order),
        Some(l) => ChaosCoefficients::indicator_com(horizon, start, strike, order, l),
    }
    .map_err(validation)?;
    let partial = norm_partial_sums(&coeffs, order).map_err(runtime)?;
    let target = coeffs.target_norm();

    let paths = k.paths.unwrap();
    let l2 = if paths > 0 {
        let ens = ensemble(horizon, k.steps.unwrap(), paths, k.seed.unwrap(), start)?;
        let lambda = k.lambda.unwrap_or(DeterministicFn::ZERO);
        let rows = ens
            .try_map_paths(|_, w| {
                let f = if w.terminal() >= strike { 1.0 } else { 0.0 };
                let driver = if k.lambda.is_some() {
                    shift_path(w, &lambda)?
                } else {
                    w.clone()
                };
                let sums = truncated_chaos_partials(&coeffs, &driver);
                Ok::<_, QcdError>(sums.iter().map(|s| (s - f) * (s - f)).collect::<Vec<f64>>())
            })
            .map_err(runtime)?;
        Some(
            column_means(&rows)
                .into_iter()
                .map(f64::sqrt)
                .collect::<Vec<f64>>(),
        )
    } else {
        None
    };

    let mut header = vec!["n", "g_n", "partial_norm", "target_norm"];
    if l2.is_some() {
        header.push("l2_error");
    }
    let mut table = Table::new(header);
    for n in 0..=order {
        let mut row = vec![
            Cell::from(n),
            Cell::from(coeffs.g[n]),
            Cell::from(partial[n]),
            Cell::from(target),
        ];
        if let Some(l2) = &l2 {
            row.push(Cell::from(l2[n]));
        }
        table.push(row);
    }
    Ok(Report {
        json: object(table.to_json_columns()),
        table: Some(table),
    })
}

pub fn hedge(k: &HedgeKnobs) -> Result<Report, CliError> {
    let horizon = k.horizon.unwrap();
    let eps = k.eps.unwrap();
    check_eps(eps, horizon)?;
    let mkt = MarketSpec::new(
        k.b.unwrap(),
        k.a.unwrap(),
        k.r.unwrap(),
        k.strike.unwrap(),
        horizon,
        k.p0.unwrap(),
        k.start.unwrap(),
    )
    .map_err(validation)?;
    let steps = k.steps.unwrap();
    let freqs = k.freqs.clone().unwrap();
    if freqs.is_empty() || freqs.iter().any(|&f| f == 0 || !steps.is_multiple_of(f)) {
        return Err(CliError::Validation(format!(
            "every frequency in {freqs:?} must divide --steps {steps}"
        )));
    }
    let ens = ensemble(horizon, steps, k.paths.unwrap(), k.seed.unwrap(), mkt.start)?;
    let report = hedge_report(&mkt, &ens, &freqs, eps).map_err(runtime)?;
    let mut table = Table::new(vec!["frequency", "l2_error", "q95_error", "mean_error"]);
    for row in &report.rows {
        table.push(vec![
            Cell::from(row.frequency),
            Cell::from(row.l2_error),
            Cell::from(row.q95_error),
            Cell::from(row.mean_error),
        ]);
    }
    Ok(Report {
        json: object(serde_json::to_value(&report).map_err(runtime)?),
        table: Some(table),
    })
}

const HEAT_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
const HEAT_POINTS: [f64; 5] = [-1.5, -0.5, 0.0, 0.7, 2.0];

pub fn heat_check(k: &HeatCheckKnobs) -> Result<Report, CliError> {
    let max_order = k.max_order.unwrap();
    if max_order >= DEFAULT_MAX_ORDER {
        return Err(CliError::Validation(format!(
            "--max-order must be below {DEFAULT_MAX_ORDER}"
        )));
    }
    let mut table = Table::new(vec!["n", "t", "x", "heat_eq_residual", "hermite_residual"]);
    let (mut worst_heat, mut worst_hermite) = (0.0f64, 0.0f64);
    for n in 0..=max_order {
        for &t in &HEAT_TIMES {
            for &x in &HEAT_POINTS {
                let heat = heat_equation_residual(n, t, x, 0.0).map_err(runtime)?;
                let a = density_dx(n, t, x, 0.0).map_err(runtime)?;
                let b = density_dx_expanded(n, t, x, 0.0).map_err(runtime)?;
                let herm = (a - b).abs();
                worst_heat = worst_heat.max(heat);
                worst_hermite = worst_hermite.max(herm);
                table.push(vec![
                    Cell::from(n),
                    Cell::from(t),
                    Cell::from(x),
                    Cell::from(heat),
                    Cell::from(herm),
                ]);
            }
        }
    }
    let mut json = object(table.to_json_columns());
    json.insert("max_heat_eq_residual".into(), json!(worst_heat));
    json.insert("max_hermite_residual".into(), json!(worst_hermite));
    Ok(Report {
        json,
        table: Some(table),
    })
}

pub fn girsanov(k: &GirsanovKnobs) -> Result<Report, CliError> {
    let lambda = k.lambda.unwrap();
    let horizon = k.horizon.unwrap();
    lambda.validate_on(horizon).map_err(validation)?;
    let spec = PayoffSpec::new(k.payoff.clone().unwrap(), horizon, k.start.unwrap())
        .map_err(validation)?;
    let ens = ensemble(
        horizon,
        k.steps.unwrap(),
        k.paths.unwrap(),
        k.seed.unwrap(),
        spec.start,
    )?;
    let rows = ens
        .try_map_paths(|_, w| {
            let z = stochastic_exponential(&lambda, w)?.terminal();
            Ok((z, spec.terminal_value(w.terminal())))
        })
        .map_err(runtime)?;
    let (z, f): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let mean_z = MeanEstimate::from_samples(&z);
    let plain = MeanEstimate::from_samples(&f);
    let tilde = bayes_reweight(&f, &z).map_err(runtime)?;
    // under the tilde measure W_T = W~_T - ∫λ with W~ a Brownian motion from x
    let shift = lambda.integral(0.0, horizon);
    let tilde_closed =
        cond_exp_heat(&spec.payoff, 0.0, spec.start - shift, horizon).map_err(runtime)?;
    let closed = cond_exp_heat(&spec.payoff, 0.0, spec.start, horizon).map_err(runtime)?;
    let mut table = Table::new(vec![
        "mean_Z_T",
        "se",
        "tilde_mean_F",
        "tilde_se",
        "tilde_closed_form",
        "mean_F",
        "mean_F_se",
        "closed_form",
    ]);
    table.push(vec![
        Cell::from(mean_z.mean),
        Cell::from(mean_z.se),
        Cell::from(tilde.mean),
        Cell::from(tilde.se),
        Cell::from(tilde_closed),
        Cell::from(plain.mean),
        Cell::from(plain.se),
        Cell::from(closed),
    ]);
    let json = object(json!({
        "mean_Z_T": mean_z.mean,
        "se": mean_z.se,
        "tilde_mean_F": tilde.mean,
        "tilde_se": tilde.se,
        "tilde_closed_form": tilde_closed,
        "mean_F": plain.mean,
        "mean_F_se": plain.se,
        "closed_form": closed,
        "M": ens.count,
        "N": ens.grid.steps(),
        "seed": ens.seed,
    }));
    Ok(Report {
        json,
        table: Some(table),
    })
}
