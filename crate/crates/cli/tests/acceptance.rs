//! Acceptance battery: one PASS/FAIL line per criterion; exits non-zero if
//! any criterion fails.

#![allow(clippy::excessive_precision)]

use std::process::Command;
use std::time::Instant;

use qcd::chaos::{
    norm_partial_sums, stroock_coeff, stroock_coeff_general, truncated_chaos_partials,
    ChaosCoefficients, IteratedIntegralState,
};
use qcd::clark_ocone::{
    integrand_com, reconstruct, reconstruct_com, verify_ensemble, verify_ensemble_com,
};
use qcd::deterministic::DeterministicFn;
use qcd::heat_kernel::{density_dx, density_dx_expanded, normal_cdf};
use qcd::hedging::{delta_digital, hedge_report, MarketSpec};
use qcd::ito::{
    bayes_reweight, cond_exp_deriv, cond_exp_heat, ito_integral, stochastic_exponential,
    IntegrandPath,
};
use qcd::paths::{brownian_path, make_uniform_grid, shift_path, simulate_brownian, SamplePath};
use qcd::payoff::{Payoff, PayoffSpec};
use qcd::qcov::{
    qcd_strong, qcov, smoothed_from_qcov, strong_from_qcov, QcdEstimatorConfig, QcovPath,
};
use qcd::stats::{median, MeanEstimate};

const SEEDS: u64 = 100;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn and(parts: Vec<Outcome>) -> Outcome {
    let pass = parts.iter().all(|p| p.pass);
    let detail = parts
        .iter()
        .map(|p| format!("{}{}", if p.pass { "" } else { "[fail] " }, p.detail))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(pass, detail)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|p| p[1] < p[0])
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn strong_cfg(k: usize, dt: f64) -> QcdEstimatorConfig {
    QcdEstimatorConfig {
        window_h: k as f64 * dt,
        half_width: k,
    }
}

fn criterion_1() -> Outcome {
    let g = make_uniform_grid(1.0, 1 << 14).unwrap();
    let cfg = strong_cfg(64, g.dt());
    let mid = g.steps() / 2;
    let drift = SamplePath::from_fn(g, "S", |t| 0.8 * t).unwrap();
    let (mut err, mut drift_est) = (Vec::new(), Vec::new());
    for seed in 0..SEEDS {
        let w = brownian_path(&g, seed, 0, 0.0);
        err.push((qcd_strong(&w, &w, mid, &cfg).unwrap() - 1.0).abs());
        drift_est.push(qcd_strong(&drift, &w, mid, &cfg).unwrap().abs());
    }
    let (e, d) = (median(&err), median(&drift_est));
    and(vec![
        Outcome::new(e <= 0.15, format!("median |D_W W - 1| = {e:.4}")),
        Outcome::new(d <= 0.05, format!("median |D_W drift| = {d:.2e}")),
    ])
}

fn criterion_2() -> Outcome {
    let g = make_uniform_grid(1.0, 1 << 12).unwrap();
    let q = QcovPath::from_values(g, g.nodes()).unwrap();
    let mut worst = 0.0f64;
    for h in [0.01, 0.05, 0.125, 0.3] {
        worst = worst.max((smoothed_from_qcov(&q, 0, h).unwrap() - 1.0).abs());
    }
    Outcome::new(
        worst <= 1e-12,
        format!("max |estimate - 1| at t = 0 = {worst:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    // window k dt = T/8
    let g = make_uniform_grid(1.0, 1 << 12).unwrap();
    let k = g.steps() / 8;
    let lambdas = [
        DeterministicFn::Const(0.5),
        DeterministicFn::Linear {
            intercept: 0.2,
            slope: 0.6,
        },
    ];
    let u = IntegrandPath::from_nodes(g, |_, t| t).unwrap();
    let mut worst_ratio = 0.0f64;
    for lam in &lambdas {
        let bound = 10.0 * g.dt() * lam.sup_abs(1.0);
        for seed in 0..20 {
            let w = brownian_path(&g, seed, 0, 0.0);
            let wt = shift_path(&w, lam).unwrap();
            for s in [w.clone(), ito_integral(&u, &w).unwrap()] {
                let q = qcov(&s, &w).unwrap();
                let qt = qcov(&s, &wt).unwrap();
                for i in k..=g.steps() - k {
                    let a = strong_from_qcov(&q, i, k).unwrap();
                    let b = strong_from_qcov(&qt, i, k).unwrap();
                    worst_ratio = worst_ratio.max((a - b).abs() / bound);
                }
            }
        }
    }
    Outcome::new(
        worst_ratio <= 1.0,
        format!("max deviation / (10 dt sup|λ|) = {worst_ratio:.3} at k = N/8"),
    )
}

fn indicator_battery(lambda: Option<DeterministicFn>) -> (Vec<f64>, bool) {
    let spec = PayoffSpec::new(Payoff::Indicator { strike: 0.5 }, 1.0, 0.0).unwrap();
    let mut medians = Vec::new();
    for log_n in [8, 10, 12, 14] {
        let g = make_uniform_grid(1.0, 1 << log_n).unwrap();
        let l2: Vec<f64> = (0..SEEDS)
            .map(|seed| {
                let ens = simulate_brownian(g, 100, seed, 0.0).unwrap();
                match &lambda {
                    None => verify_ensemble(&spec, &ens, 1e-4).unwrap().l2_error,
                    Some(l) => verify_ensemble_com(&spec, l, &ens, 1e-4).unwrap().l2_error,
                }
            })
            .collect();
        medians.push(median(&l2));
    }
    let ok = strictly_decreasing(&medians);
    (medians, ok)
}

fn criterion_4() -> Outcome {
    let g = make_uniform_grid(1.0, 1 << 12).unwrap();
    let ident = PayoffSpec::new("identity".parse().unwrap(), 1.0, 0.0).unwrap();
    let worst_ident = (0..20)
        .map(|seed| {
            let w = brownian_path(&g, seed, 0, 0.0);
            (reconstruct(&ident, &w, 1e-4).unwrap() - w.terminal()).abs()
        })
        .fold(0.0f64, f64::max);
    let square = PayoffSpec::new("square".parse().unwrap(), 1.0, 0.0).unwrap();
    let sq_l2 = verify_ensemble(
        &square,
        &simulate_brownian(g, 10_000, 1, 0.0).unwrap(),
        1e-4,
    )
    .unwrap()
    .l2_error;
    let (medians, dec) = indicator_battery(None);
    let spec = PayoffSpec::new(Payoff::Indicator { strike: 0.5 }, 1.0, 0.0).unwrap();
    let rep = verify_ensemble(
        &spec,
        &simulate_brownian(make_uniform_grid(1.0, 256).unwrap(), 10_000, 2, 0.0).unwrap(),
        1e-4,
    )
    .unwrap();
    let z = (rep.e_f - 0.3085375387259869) / rep.e_f_se;
    and(vec![
        Outcome::new(
            worst_ident <= 1e-12,
            format!("W_T max error {worst_ident:.1e}"),
        ),
        Outcome::new(sq_l2 < 0.05, format!("W_T² L2 {sq_l2:.4}")),
        Outcome::new(
            dec,
            format!(
                "indicator L2 medians over N = 2^8..2^14 {}",
                fmt_list(&medians)
            ),
        ),
        Outcome::new(z.abs() <= 3.0, format!("E F z-score {z:.2}")),
    ])
}

fn criterion_5() -> Outcome {
    let lam = DeterministicFn::Const(0.5);
    let (medians, dec) = indicator_battery(Some(lam));
    let spec = PayoffSpec::new(Payoff::Indicator { strike: 0.5 }, 1.0, 0.0).unwrap();
    let g = make_uniform_grid(1.0, 64).unwrap();
    let ens = simulate_brownian(g, 100_000, 3, 0.0).unwrap();
    let rows = ens.map_paths(|_, w| {
        (
            spec.terminal_value(w.terminal()),
            stochastic_exponential(&lam, w).unwrap().terminal(),
        )
    });
    let (f, z): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let tilde = bayes_reweight(&f, &z).unwrap();
    let score = tilde.z_score(0.15865525393145705);
    let g2 = make_uniform_grid(1.0, 1024).unwrap();
    let identical = (0..20).all(|seed| {
        let w = brownian_path(&g2, seed, 0, 0.0);
        reconstruct_com(&spec, &DeterministicFn::ZERO, &w, 1e-4)
            .unwrap()
            .to_bits()
            == reconstruct(&spec, &w, 1e-4).unwrap().to_bits()
    });
    and(vec![
        Outcome::new(
            dec,
            format!("COM L2 medians over N = 2^8..2^14 {}", fmt_list(&medians)),
        ),
        Outcome::new(score.abs() <= 3.0, format!("tilde E F z-score {score:.2}")),
        Outcome::new(identical, "λ = 0 reconstruction bit-identical"),
    ])
}

// ∂ₓⁿ p(t, x, 0) evaluated symbolically at 25 digits
const SYMBOLIC: [(usize, f64, f64, f64); 14] = [
    (0, 0.3, -0.9, 0.18882169327663352341),
    (0, 2.5, 2.0, 0.11337165224497913112),
    (1, 1.0, 0.5, -0.17603266338214973889),
    (1, 0.7, 0.1, -0.067633350470607717442),
    (2, 0.3, -0.9, 1.0699895952342566327),
    (2, 2.5, 2.0, 0.027209196538794991469),
    (3, 1.0, 0.5, 0.48408982430091178194),
    (3, 0.7, 0.1, 0.28847694384402067236),
    (4, 0.3, -0.9, -12.399291191832268037),
    (4, 2.5, 2.0, -0.073283436011154510357),
    (5, 1.0, 0.5, -2.2114103337382560948),
    (5, 0.7, 0.1, -2.0507186787216628228),
    (6, 0.3, -0.9, 117.71983566391007776),
    (6, 2.5, 2.0, 0.16467731323853096704),
];

// Φ at 22 digits
const PHI: [(f64, f64); 6] = [
    (-3.0, 0.001349898031630094526652),
    (-1.0, 0.1586552539314570514148),
    (-0.5, 0.3085375387259868963623),
    (0.1, 0.5398278372770289814654),
    (1.96, 0.9750021048517795658634),
    (4.0, 0.9999683287581668800787),
];

fn criterion_6() -> Outcome {
    let mut heat = 0.0f64;
    for n in 0..=4 {
        for &t in &[0.7f64, 1.0, 1.6] {
            for &x in &[-1.2, 0.0, 0.4, 1.9] {
                let f = |t: f64, x: f64| density_dx(n, t, x, 0.0).unwrap();
                let (ht, hx) = (1e-4 * t, 1e-3 * t.sqrt());
                let dt = (f(t + ht, x) - f(t - ht, x)) / (2.0 * ht);
                let second = |h: f64| (f(t, x + h) - 2.0 * f(t, x) + f(t, x - h)) / (h * h);
                let dxx = (4.0 * second(0.5 * hx) - second(hx)) / 3.0;
                heat = heat.max((dt - 0.5 * dxx).abs());
            }
        }
    }
    let sym = SYMBOLIC
        .iter()
        .map(|&(n, t, x, v)| ((density_dx(n, t, x, 0.0).unwrap() - v) / v).abs())
        .fold(0.0f64, f64::max);
    let phi = PHI
        .iter()
        .map(|&(z, v)| (normal_cdf(z) - v).abs())
        .fold(0.0f64, f64::max);
    and(vec![
        Outcome::new(heat < 1e-6, format!("heat residual {heat:.1e}")),
        Outcome::new(sym <= 1e-10, format!("symbolic rel. error {sym:.1e}")),
        Outcome::new(phi <= 1e-12, format!("Φ error {phi:.1e}")),
    ])
}

fn criterion_7() -> Outcome {
    let (horizon, y) = (1.0, 0.3);
    let g = make_uniform_grid(horizon, 4).unwrap();
    let ens = simulate_brownian(g, 100_000, 7, 0.0).unwrap();
    let paths = ens.materialize();
    let mut worst = 0.0f64;
    for n in 0..=2 {
        let target = density_dx(n, horizon, 0.0, y).unwrap();
        for i in 1..=3 {
            let t = g.node(i);
            let v: Vec<f64> = paths
                .iter()
                .map(|w| density_dx(n, horizon - t, w.values[i], y).unwrap())
                .collect();
            worst = worst.max(MeanEstimate::from_samples(&v).z_score(target).abs());
        }
    }
    Outcome::new(
        worst <= 3.0,
        format!("max |z| over n ≤ 2, t ∈ {{T/4, T/2, 3T/4}} = {worst:.2}"),
    )
}

fn criterion_8() -> Outcome {
    let cubic = Payoff::Polynomial {
        coeffs: vec![0.2, -1.0, 0.5, 0.3],
    };
    let cubic_prime = Payoff::Polynomial {
        coeffs: vec![-1.0, 1.0, 0.9],
    };
    let mut worst = 0.0f64;
    for &t in &[0.0, 0.25, 0.5, 0.9] {
        for &x in &[-1.5, -0.3, 0.0, 0.8, 2.0] {
            let sin = (cond_exp_deriv(&Payoff::Sin, t, x, 1.0).unwrap()
                - cond_exp_heat(&Payoff::Cos, t, x, 1.0).unwrap())
            .abs();
            let cos = (cond_exp_deriv(&Payoff::Cos, t, x, 1.0).unwrap()
                + cond_exp_heat(&Payoff::Sin, t, x, 1.0).unwrap())
            .abs();
            let cub = (cond_exp_deriv(&cubic, t, x, 1.0).unwrap()
                - cond_exp_heat(&cubic_prime, t, x, 1.0).unwrap())
            .abs();
            worst = worst.max(sin).max(cos).max(cub);
        }
    }
    Outcome::new(worst <= 1e-8, format!("max lattice gap {worst:.1e}"))
}

fn criterion_9() -> Outcome {
    // cross-implementation of coefficients
    let (t, x, k) = (1.0, 0.3, 0.1);
    let mut coeff = 0.0f64;
    for n in 1..=12 {
        let a = stroock_coeff(n, t, x, k).unwrap();
        let b = density_dx_expanded(n - 1, t, x - k, 0.0).unwrap();
        coeff = coeff.max((a - b).abs());
    }
    let spec = PayoffSpec::new(Payoff::Indicator { strike: k }, t, x).unwrap();
    let nodes: [&[f64]; 3] = [&[0.3], &[0.2, 0.7], &[0.1, 0.4, 0.8]];
    for (i, tn) in nodes.iter().enumerate() {
        let a = stroock_coeff_general(&spec, i + 1, tn).unwrap();
        coeff = coeff.max((a - stroock_coeff(i + 1, t, x, k).unwrap()).abs());
    }

    // norm identity at x = K, T = 1
    let c40 = ChaosCoefficients::indicator(1.0, 0.0, 0.0, 40).unwrap();
    let sums = norm_partial_sums(&c40, 40).unwrap();
    let monotone = sums.windows(2).all(|p| p[1] >= p[0]);
    let gap = (sums[40] - 0.5).abs();

    // second moments of J_n(1)
    let g = make_uniform_grid(1.0, 2048).unwrap();
    let js = simulate_brownian(g, 10_000, 9, 0.0)
        .unwrap()
        .map_paths(|_, w| IteratedIntegralState::run(1.0, 4, w).values);
    let mut fact = 1.0;
    let mut worst_z = 0.0f64;
    for n in 1..=4 {
        fact *= n as f64;
        let sq: Vec<f64> = js.iter().map(|j| j[n] * j[n]).collect();
        worst_z = worst_z.max(MeanEstimate::from_samples(&sq).z_score(1.0 / fact).abs());
    }

    // truncated reconstruction
    let orders = [1usize, 3, 5, 9, 15];
    let c15 = ChaosCoefficients::indicator(1.0, 0.0, 0.0, 15).unwrap();
    let gf = make_uniform_grid(1.0, 1 << 14).unwrap();
    let mut per_seed: Vec<Vec<f64>> = vec![Vec::new(); orders.len()];
    for seed in 0..SEEDS {
        let rows = simulate_brownian(gf, 20, seed, 0.0)
            .unwrap()
            .map_paths(|_, w| {
                let f = if w.terminal() >= 0.0 { 1.0 } else { 0.0 };
                let s = truncated_chaos_partials(&c15, w);
                orders
                    .iter()
                    .map(|&n| (s[n] - f).powi(2))
                    .collect::<Vec<f64>>()
            });
        for (j, col) in per_seed.iter_mut().enumerate() {
            let v: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.push(qcd::stats::mean(&v).sqrt());
        }
    }
    let trunc: Vec<f64> = per_seed.iter().map(|c| median(c)).collect();

    and(vec![
        Outcome::new(
            coeff <= 1e-10,
            format!("coefficient routes agree to {coeff:.1e}"),
        ),
        Outcome::new(monotone, "partial sums monotone"),
        Outcome::new(
            gap <= 1e-6,
            format!(
                "|partial sum (40 terms) - 1/2| = {gap:.4e} (sum = {:.6})",
                sums[40]
            ),
        ),
        Outcome::new(worst_z <= 3.0, format!("E J_n² max |z| = {worst_z:.2}")),
        Outcome::new(
            strictly_decreasing(&trunc),
            format!(
                "truncation L2 medians at N_trunc {orders:?} {}",
                fmt_list(&trunc)
            ),
        ),
    ])
}

fn criterion_10() -> Outcome {
    let markets = [
        MarketSpec::new(
            DeterministicFn::Const(0.05),
            DeterministicFn::Const(0.2),
            DeterministicFn::Const(0.01),
            0.5,
            1.0,
            1.0,
            0.0,
        )
        .unwrap(),
        MarketSpec::new(
            DeterministicFn::Linear {
                intercept: 0.02,
                slope: 0.01,
            },
            DeterministicFn::Linear {
                intercept: 0.15,
                slope: 0.1,
            },
            DeterministicFn::Linear {
                intercept: 0.01,
                slope: 0.02,
            },
            0.5,
            1.0,
            1.0,
            0.0,
        )
        .unwrap(),
    ];
    let spec = PayoffSpec::new(Payoff::Indicator { strike: 0.5 }, 1.0, 0.0).unwrap();
    let mut rel = 0.0f64;
    for m in &markets {
        let lam = m.lambda();
        let d_t = m.discount(1.0);
        for &t in &[0.0, 0.2, 0.5, 0.9, 0.999] {
            for &w in &[-1.0, 0.0, 0.45, 0.5, 1.3] {
                for &p in &[0.5, 1.0, 1.7] {
                    let lhs =
                        delta_digital(m, t, w, p, 1e-4).unwrap() * m.a.eval(t) * m.discount(t) * p
                            / d_t;
                    let rhs = integrand_com(&spec, &lam, t, w, 1e-4).unwrap();
                    rel = rel.max(((lhs - rhs) / rhs).abs());
                }
            }
        }
    }

    let m = &markets[0];
    let freqs = [1usize << 6, 1 << 8, 1 << 10, 1 << 14];
    let g = make_uniform_grid(1.0, 1 << 14).unwrap();
    let mut per_freq: Vec<Vec<f64>> = vec![Vec::new(); freqs.len()];
    for seed in 0..SEEDS {
        let ens = simulate_brownian(g, 50, seed, 0.0).unwrap();
        let rep = hedge_report(m, &ens, &freqs, 1e-4).unwrap();
        for (j, row) in rep.rows.iter().enumerate() {
            per_freq[j].push(row.l2_error);
        }
    }
    let medians: Vec<f64> = per_freq.iter().map(|c| median(c)).collect();
    let nonincreasing = medians.windows(2).all(|p| p[1] <= p[0]);

    let ens = simulate_brownian(make_uniform_grid(1.0, 64).unwrap(), 20_000, 4, 0.0).unwrap();
    let rep = hedge_report(m, &ens, &[64], 1e-4).unwrap();
    let z = (rep.reweighted_price - rep.discounted_price) / rep.reweighted_price_se;

    and(vec![
        Outcome::new(
            rel <= 1e-12,
            format!("Δ a D P / D_T vs COM integrand rel. {rel:.1e}"),
        ),
        Outcome::new(
            nonincreasing,
            format!("L2 medians at 2^6, 2^8, 2^10, 2^14 {}", fmt_list(&medians)),
        ),
        Outcome::new(z.abs() <= 3.0, format!("risk-neutral price z-score {z:.2}")),
    ])
}

fn criterion_11() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_qcdsim");
    let runs: [&[&str]; 8] = [
        &["paths", "--paths", "6", "--steps", "64", "--seed", "3"],
        &[
            "verify-qcd",
            "--paths",
            "8",
            "--steps",
            "4096",
            "--seed",
            "5",
        ],
        &[
            "clark-ocone",
            "--paths",
            "300",
            "--steps",
            "512",
            "--seed",
            "7",
        ],
        &[
            "clark-ocone",
            "--paths",
            "300",
            "--steps",
            "512",
            "--lambda",
            "const:0.5",
            "--format",
            "csv",
        ],
        &[
            "chaos",
            "--truncate",
            "9",
            "--paths",
            "64",
            "--steps",
            "1024",
        ],
        &[
            "hedge",
            "--paths",
            "64",
            "--steps",
            "1024",
            "--freqs",
            "64,256,1024",
        ],
        &["heat-check"],
        &[
            "girsanov", "--paths", "2000", "--steps", "128", "--seed", "11",
        ],
    ];
    let mut bad = Vec::new();
    for args in runs {
        let out = |threads: Option<&str>, env: Option<&str>| {
            let mut cmd = Command::new(bin);
            cmd.args(args);
            cmd.env_remove("QCDSIM_THREADS");
            if let Some(t) = threads {
                cmd.args(["--threads", t]);
            }
            if let Some(e) = env {
                cmd.env("QCDSIM_THREADS", e);
            }
            let o = cmd.output().expect("run qcdsim");
            (o.status.code(), o.stdout)
        };
        let base = out(Some("1"), None);
        let ok = base.0 == Some(0)
            && !base.1.is_empty()
            && out(Some("4"), None) == base
            && out(None, Some("3")) == base
            && out(None, None) == base;
        if !ok {
            bad.push(args[0]);
        }
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "{} runs byte-identical at 1, 3, 4 and default threads",
                runs.len()
            )
        } else {
            format!("differs: {bad:?}")
        },
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("QCD ground truth", criterion_1),
        ("smoothed difference at t = 0", criterion_2),
        ("Girsanov invariance of QCD", criterion_3),
        ("Clark-Ocone reconstruction", criterion_4),
        ("Clark-Ocone under change of measure", criterion_5),
        ("heat-kernel suite", criterion_6),
        ("kernel martingales", criterion_7),
        ("conditional chain rule", criterion_8),
        ("chaos suite", criterion_9),
        ("digital hedge", criterion_10),
        ("reproducibility", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<38} {}  ({}; {:.1}s)",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
