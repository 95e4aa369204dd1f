use qcd::heat_kernel::{density, normal_cdf};
use qcd::ito::{ito_integral, IntegrandPath};
use qcd::paths::{brownian_path, make_uniform_grid, SamplePath};
use qcd::qcov::{qcd_profile, qcd_smoothed, qcd_strong, QcdEstimatorConfig};
use qcd::stats::{mean, median};

fn strong(k: usize, dt: f64) -> QcdEstimatorConfig {
    QcdEstimatorConfig {
        window_h: k as f64 * dt,
        half_width: k,
    }
}

#[test]
fn refinement_halves_the_error() {
    // k dt = 1/64 on both grids, so k goes 16 -> 64
    let errs = |n: usize| {
        let g = make_uniform_grid(1.0, n).unwrap();
        let cfg = strong(n / 64, g.dt());
        let e: Vec<f64> = (0..200)
            .map(|seed| {
                let w = brownian_path(&g, seed, 0, 0.0);
                (qcd_strong(&w, &w, n / 2, &cfg).unwrap() - 1.0).abs()
            })
            .collect();
        median(&e)
    };
    let ratio = errs(1 << 12) / errs(1 << 10);
    assert!((0.35..0.7).contains(&ratio), "ratio {ratio}");
}

#[test]
fn profile_of_an_ito_integral_follows_its_integrand() {
    let g = make_uniform_grid(1.0, 1 << 14).unwrap();
    let cfg = strong(64, g.dt());
    let u = IntegrandPath::from_nodes(g, |_, t| t).unwrap();
    let rms: Vec<f64> = (0..100)
        .map(|seed| {
            let w = brownian_path(&g, seed, 0, 0.0);
            let s = ito_integral(&u, &w).unwrap();
            let prof = qcd_profile(&s, &w, &cfg).unwrap();
            let sq: Vec<f64> = prof
                .interior()
                .map(|(i, v)| (v - g.node(i)).powi(2))
                .collect();
            mean(&sq).sqrt()
        })
        .collect();
    assert!(mean(&rms) < 0.1, "rms {}", mean(&rms));
}

#[test]
fn profile_of_w_and_of_a_drift() {
    let g = make_uniform_grid(1.0, 1 << 14).unwrap();
    let cfg = QcdEstimatorConfig::default_for(&g);
    let w = brownian_path(&g, 11, 0, 0.0);
    let prof = qcd_profile(&w, &w, &cfg).unwrap();
    let vals: Vec<f64> = prof.interior().map(|(_, v)| v).collect();
    assert!((mean(&vals) - 1.0).abs() < 0.05);
    assert_eq!(
        prof.flagged.iter().filter(|f| **f).count(),
        2 * cfg.half_width
    );
    let drift = SamplePath::from_fn(g, "S", |t| 0.7 * t).unwrap();
    let prof = qcd_profile(&drift, &w, &cfg).unwrap();
    assert!(prof.interior().all(|(_, v)| v.abs() < 0.05));
}

#[test]
fn smoothed_estimator_at_mid_horizon() {
    let g = make_uniform_grid(1.0, 1 << 14).unwrap();
    let errs: Vec<f64> = (0..100)
        .map(|seed| {
            let w = brownian_path(&g, seed, 0, 0.0);
            (qcd_smoothed(&w, &w, 1 << 13, 0.05).unwrap() - 1.0).abs()
        })
        .collect();
    assert!(median(&errs) < 0.1);
}

#[test]
fn qcd_of_the_indicator_martingale() {
    // M_t = Φ((W_t - K)/√(T - t)) has d<M, W>/dt = p(T - t, W_t - K)
    let (k, horizon) = (0.5, 1.0);
    let g = make_uniform_grid(horizon, 1 << 14).unwrap();
    let cfg = QcdEstimatorConfig::default_for(&g);
    let mut sq = Vec::new();
    for seed in 0..10 {
        let w = brownian_path(&g, seed, 0, 0.0);
        let m = SamplePath::new(
            g,
            w.values
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let tau = horizon - g.node(i);
                    if tau > 0.0 {
                        normal_cdf((x - k) / tau.sqrt())
                    } else if x >= k {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            "M",
        )
        .unwrap();
        let lo = g.index_at_or_before(0.1 * horizon);
        let hi = g.index_at_or_before(0.8 * horizon);
        for i in (lo..=hi).step_by(64) {
            let est = qcd_strong(&m, &w, i, &cfg).unwrap();
            let exact = density(horizon - g.node(i), w.values[i] - k, 0.0).unwrap();
            sq.push((est - exact).powi(2));
        }
    }
    assert!(mean(&sq).sqrt() < 0.1);
}
