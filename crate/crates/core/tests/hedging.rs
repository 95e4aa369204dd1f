use qcd::deterministic::DeterministicFn;
use qcd::hedging::{hedge_report, simulate_stock, MarketSpec};
use qcd::ito::{bayes_reweight, stochastic_exponential};
use qcd::paths::{make_uniform_grid, simulate_brownian};
use qcd::stats::MeanEstimate;

fn c(v: f64) -> DeterministicFn {
    DeterministicFn::Const(v)
}

#[test]
fn stock_has_lognormal_mean() {
    let g = make_uniform_grid(1.0, 16).unwrap();
    let ens = simulate_brownian(g, 100_000, 31, 0.0).unwrap();
    let m = MarketSpec::new(c(0.05), c(0.2), c(0.01), 0.5, 1.0, 1.0, 0.0).unwrap();
    let p = ens.map_paths(|_, w| simulate_stock(&m, w).unwrap().terminal());
    assert!(MeanEstimate::from_samples(&p).within(0.05f64.exp(), 3.0));
    let flat = MarketSpec::new(c(0.03), c(0.2), c(0.03), 0.5, 1.0, 1.0, 0.0).unwrap();
    let disc =
        ens.map_paths(|_, w| simulate_stock(&flat, w).unwrap().terminal() * (-0.03f64).exp());
    assert!(MeanEstimate::from_samples(&disc).within(1.0, 3.0));
}

#[test]
fn risk_neutral_price() {
    let g = make_uniform_grid(1.0, 64).unwrap();
    let ens = simulate_brownian(g, 20_000, 2, 0.0).unwrap();
    let m = MarketSpec::new(
        DeterministicFn::Linear {
            intercept: 0.02,
            slope: 0.06,
        },
        DeterministicFn::Linear {
            intercept: 0.25,
            slope: -0.1,
        },
        c(0.01),
        0.3,
        1.0,
        1.0,
        0.0,
    )
    .unwrap();
    let lam = m.lambda();
    let d_t = m.discount(1.0);
    let rows = ens.map_paths(|_, w| {
        (
            d_t * m.payoff(w.terminal()),
            stochastic_exponential(&lam, w).unwrap().terminal(),
        )
    });
    let (v, z): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let est = bayes_reweight(&v, &z).unwrap();
    assert!(
        est.within(m.discounted_price(), 3.0),
        "z = {}",
        est.z_score(m.discounted_price())
    );
}

#[test]
fn error_curves_fall_with_and_without_drift() {
    let g = make_uniform_grid(1.0, 1024).unwrap();
    let ens = simulate_brownian(g, 400, 12, 0.0).unwrap();
    for b in [0.01, 0.09] {
        let m = MarketSpec::new(c(b), c(0.2), c(0.01), 0.5, 1.0, 1.0, 0.0).unwrap();
        let rep = hedge_report(&m, &ens, &[16, 64, 256, 1024], 1e-4).unwrap();
        for pair in rep.rows.windows(2) {
            assert!(pair[1].l2_error < pair[0].l2_error, "b={b}: {:?}", rep.rows);
        }
        let finest = rep.rows.last().unwrap();
        assert!(
            finest.mean_error.abs() <= 3.0 * finest.mean_error_se,
            "b={b}: {} ± {}",
            finest.mean_error,
            finest.mean_error_se
        );
    }
}
