//! Pathwise quadratic covariation and the quadratic-covariation derivative
//! (QCD) estimators.
//!
//! `⟨S, W⟩` is estimated by cumulative sums of products of forward
//! increments on the simulation grid. Two derivative estimators sit on top:
//!
//! * the strong form `d⟨S, W⟩_t / dt`, estimated by a symmetric difference
//!   of the covariation path over `k` grid steps on either side of `t`;
//! * the smoothed difference
//!   `3/(2h³) ∫_0^h r [⟨S,W⟩_{t+r} - ⟨S,W⟩_{t-r}] dr` for `t > 0`, and
//!   `3/h³ ∫_0^h r ⟨S,W⟩_r dr` at `t = 0`, integrated with composite
//!   Simpson weights on the grid nodes inside the window.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, QcdError, Result};
use crate::paths::{ensure_same_grid, SamplePath, TimeGrid};

/// Cumulative covariation estimate, `values[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QcovPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl QcovPath {
    /// Wraps an already-known covariation path (e.g. an analytic one).
    pub fn from_values(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return invalid("covariation path length does not match the grid");
        }
        Ok(QcovPath { grid, values })
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.grid.steps()]
    }
}

/// `⟨X, Y⟩_{t_i} ≈ Σ_{j<i} (X_{j+1} - X_j)(Y_{j+1} - Y_j)`, summed left to
/// right.
pub fn qcov(x: &SamplePath, y: &SamplePath) -> Result<QcovPath> {
    ensure_same_grid(&x.grid, &y.grid)?;
    let mut values = Vec::with_capacity(x.values.len());
    let mut acc = 0.0;
    values.push(acc);
    for j in 0..x.grid.steps() {
        acc += (x.values[j + 1] - x.values[j]) * (y.values[j + 1] - y.values[j]);
        values.push(acc);
    }
    Ok(QcovPath {
        grid: x.grid,
        values,
    })
}

/// Knobs for the QCD estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcdEstimatorConfig {
    /// Window `h` of the smoothed estimator.
    pub window_h: f64,
    /// Half-width `k` (grid steps) of the strong estimator.
    pub half_width: usize,
}

impl QcdEstimatorConfig {
    /// `k ≈ 1/√dt` so that `k dt ≈ √dt`, with `h = k dt`.
    pub fn default_for(grid: &TimeGrid) -> Self {
        let k = (1.0 / grid.dt().sqrt()).round().max(1.0) as usize;
        QcdEstimatorConfig {
            window_h: k as f64 * grid.dt(),
            half_width: k,
        }
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        let dt = grid.dt();
        if self.half_width == 0 {
            return invalid("strong half-width must be at least one step");
        }
        if self.window_h < 2.0 * dt * (1.0 - 1e-12) {
            return Err(QcdError::WindowTooSmall {
                h: self.window_h,
                dt,
            });
        }
        if self.half_width as f64 * dt >= grid.horizon() / 2.0 {
            return invalid(format!(
                "half-width {} steps reaches past T/2",
                self.half_width
            ));
        }
        Ok(())
    }
}

/// Symmetric difference `(Q_{i+k} - Q_{i-k}) / (2 k dt)` of a covariation
/// path.
pub fn strong_from_qcov(q: &QcovPath, index: usize, half_width: usize) -> Result<f64> {
    let n = q.grid.steps();
    if half_width == 0 {
        return invalid("strong half-width must be at least one step");
    }
    if index < half_width || index + half_width > n {
        return Err(QcdError::OutOfWindow {
            index,
            lo: half_width,
            hi: n.saturating_sub(half_width),
        });
    }
    let span = 2.0 * half_width as f64 * q.grid.dt();
    Ok((q.values[index + half_width] - q.values[index - half_width]) / span)
}

/// Strong QCD estimate of `D_W S` at node `index`.
pub fn qcd_strong(
    s: &SamplePath,
    w: &SamplePath,
    index: usize,
    cfg: &QcdEstimatorConfig,
) -> Result<f64> {
    let q = qcov(s, w)?;
    strong_from_qcov(&q, index, cfg.half_width)
}

/// Composite rule on equally spaced samples: Simpson for an even number of
/// panels, Simpson plus a closing 3/8 block for an odd number. Both are
/// exact for cubics.
fn composite_simpson(f: &[f64], dx: f64) -> f64 {
    let panels = f.len() - 1;
    let simpson = |g: &[f64]| -> f64 {
        let m = g.len() - 1;
        let mut acc = g[0] + g[m];
        for (j, &v) in g.iter().enumerate().take(m).skip(1) {
            acc += if j % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        acc * dx / 3.0
    };
    match panels {
        0 => 0.0,
        1 => 0.5 * dx * (f[0] + f[1]),
        p if p % 2 == 0 => simpson(f),
        p => {
            let split = p - 3;
            let head = if split > 0 {
                simpson(&f[..=split])
            } else {
                0.0
            };
            let t = &f[split..];
            head + 3.0 * dx / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3])
        }
    }
}

/// Number of whole grid steps inside the window `h`.
fn window_steps(h: f64, dt: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() || h < 2.0 * dt * (1.0 - 1e-12) {
        return Err(QcdError::WindowTooSmall { h, dt });
    }
    Ok((h / dt * (1.0 + 1e-12)).floor() as usize)
}

/// Smoothed difference of a covariation path at node `index`.
///
/// The window is truncated to the `m = ⌊h/dt⌋` grid steps it covers and the
/// prefactor uses `m dt`, so the kernel stays normalised on the nodes.
pub fn smoothed_from_qcov(q: &QcovPath, index: usize, h: f64) -> Result<f64> {
    let dt = q.grid.dt();
    let n = q.grid.steps();
    let m = window_steps(h, dt)?;
    let h_eff = m as f64 * dt;
    if index == 0 {
        if m > n {
            return Err(QcdError::OutOfWindow {
                index,
                lo: 0,
                hi: 0,
            });
        }
        let f: Vec<f64> = (0..=m).map(|j| j as f64 * dt * q.values[j]).collect();
        return Ok(3.0 / h_eff.powi(3) * composite_simpson(&f, dt));
    }
    if index < m || index + m > n {
        return Err(QcdError::OutOfWindow {
            index,
            lo: m,
            hi: n.saturating_sub(m),
        });
    }
    let f: Vec<f64> = (0..=m)
        .map(|j| j as f64 * dt * (q.values[index + j] - q.values[index - j]))
        .collect();
    Ok(3.0 / (2.0 * h_eff.powi(3)) * composite_simpson(&f, dt))
}

/// Smoothed QCD estimate of `D_W S` at node `index` with window `h`.
pub fn qcd_smoothed(s: &SamplePath, w: &SamplePath, index: usize, h: f64) -> Result<f64> {
    let q = qcov(s, w)?;
    smoothed_from_qcov(&q, index, h)
}

/// Strong QCD estimates at every node; nodes closer than `k` steps to either
/// end take the nearest interior estimate and are flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct QcdProfile {
    pub path: SamplePath,
    pub flagged: Vec<bool>,
}

impl QcdProfile {
    /// `(node index, estimate)` over unflagged nodes.
    pub fn interior(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.path
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.flagged[*i])
            .map(|(i, &v)| (i, v))
    }
}

pub fn qcd_profile(s: &SamplePath, w: &SamplePath, cfg: &QcdEstimatorConfig) -> Result<QcdProfile> {
    cfg.validate(&s.grid)?;
    let q = qcov(s, w)?;
    Ok(profile_from_qcov(&q, cfg.half_width))
}

pub(crate) fn profile_from_qcov(q: &QcovPath, k: usize) -> QcdProfile {
    let n = q.grid.steps();
    let (lo, hi) = (k, n - k);
    let span = 2.0 * k as f64 * q.grid.dt();
    let mut values = Vec::with_capacity(n + 1);
    let mut flagged = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let j = i.clamp(lo, hi);
        values.push((q.values[j + k] - q.values[j - k]) / span);
        flagged.push(i != j);
    }
    QcdProfile {
        path: SamplePath {
            grid: q.grid,
            values,
            label: "qcd".to_string(),
        },
        flagged,
    }
}
