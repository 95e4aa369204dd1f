//! Uniform time grids, Brownian sample paths and reproducible ensembles.
//!
//! Each path draws its Gaussian increments from its own ChaCha8 stream,
//! seeded with the ensemble seed and selected by the path index, so a path
//! can be regenerated in isolation and an ensemble is identical no matter
//! how its paths are scheduled across threads.
//!
//! Normals come from the Box-Muller transform evaluated with `libm`, which
//! is pure Rust and therefore gives the same bits on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deterministic::DeterministicFn;
use crate::error::{invalid, Result};

/// Uniform grid `t_i = i T / N`, `i = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node `i`, stored as `i * dt` rather than a running sum; the last node
    /// is the horizon itself.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }

    /// Largest node index with `t_i <= t` (clamped to the grid).
    pub fn index_at_or_before(&self, t: f64) -> usize {
        let raw = (t / self.dt() * (1.0 + 1e-12)).floor();
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(self.steps)
        }
    }

    /// Grid with the same horizon and `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Result<TimeGrid> {
        make_uniform_grid(self.horizon, self.steps * factor)
    }
}

pub fn make_uniform_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return invalid(format!(
            "horizon must be positive and finite, got {horizon}"
        ));
    }
    if steps < 2 {
        return invalid(format!("step count must be at least 2, got {steps}"));
    }
    Ok(TimeGrid { horizon, steps })
}

/// Values of one process on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub label: String,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return invalid(format!(
                "path has {} values for a grid of {} steps",
                values.len(),
                grid.steps()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite path value at node {i}"));
        }
        Ok(SamplePath {
            grid,
            values,
            label: label.into(),
        })
    }

    /// Path `t -> f(t)` sampled at the nodes.
    pub fn from_fn(grid: TimeGrid, label: &str, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..=grid.steps()).map(|i| f(grid.node(i))).collect();
        SamplePath::new(grid, values, label)
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.grid.steps()]
    }

    /// Forward increments `x_{i+1} - x_i`, `i = 0..N-1`.
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `a * self + b * other` on the shared grid.
    pub fn combine(&self, a: f64, other: &SamplePath, b: f64, label: &str) -> Result<SamplePath> {
        ensure_same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        SamplePath::new(self.grid, values, label)
    }
}

pub(crate) fn ensure_same_grid(a: &TimeGrid, b: &TimeGrid) -> Result<()> {
    if a != b {
        return invalid(format!(
            "grid mismatch: (T={}, N={}) vs (T={}, N={})",
            a.horizon(),
            a.steps(),
            b.horizon(),
            b.steps()
        ));
    }
    Ok(())
}

/// Independent standard normal stream for one path.
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NormalStream { rng, spare: None }
    }

    /// Uniform on `(0, 1]` from the top 53 bits of one draw.
    fn open_uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.open_uniform();
        let u2 = self.open_uniform();
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }
}

/// A Brownian ensemble described by `(grid, count, seed, start)`.
///
/// Paths are generated on demand from their own streams; nothing is stored,
/// so large ensembles cost memory only for what a caller keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub count: usize,
    pub seed: u64,
    pub start: f64,
}

impl PathEnsemble {
    pub fn path(&self, index: usize) -> SamplePath {
        brownian_path(&self.grid, self.seed, index as u64, self.start)
    }

    /// Applies `f` to every path in parallel; results come back in path
    /// order.
    pub fn map_paths<R, F>(&self, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize, &SamplePath) -> R + Sync + Send,
    {
        (0..self.count)
            .into_par_iter()
            .map(|i| {
                let w = self.path(i);
                f(i, &w)
            })
            .collect()
    }

    /// Fallible variant of [`PathEnsemble::map_paths`].
    pub fn try_map_paths<R, F>(&self, f: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(usize, &SamplePath) -> Result<R> + Sync + Send,
    {
        self.map_paths(f).into_iter().collect()
    }

    pub fn materialize(&self) -> Vec<SamplePath> {
        self.map_paths(|_, w| w.clone())
    }
}

/// Brownian path `W_0 = start` with `N(0, dt)` increments drawn from stream
/// `(seed, stream)`.
pub fn brownian_path(grid: &TimeGrid, seed: u64, stream: u64, start: f64) -> SamplePath {
    let mut normals = NormalStream::new(seed, stream);
    let sd = grid.dt().sqrt();
    let mut values = Vec::with_capacity(grid.steps() + 1);
    let mut w = start;
    values.push(w);
    for _ in 0..grid.steps() {
        w += sd * normals.next_normal();
        values.push(w);
    }
    SamplePath {
        grid: *grid,
        values,
        label: "W".to_string(),
    }
}

pub fn simulate_brownian(
    grid: TimeGrid,
    count: usize,
    seed: u64,
    start: f64,
) -> Result<PathEnsemble> {
    if count == 0 {
        return invalid("ensemble needs at least one path");
    }
    if !start.is_finite() {
        return invalid("start point must be finite");
    }
    Ok(PathEnsemble {
        grid,
        count,
        seed,
        start,
    })
}

/// `W~_t = W_t + ∫_0^t λ(u) du`, the drift integral in closed form.
pub fn shift_path(w: &SamplePath, lambda: &DeterministicFn) -> Result<SamplePath> {
    lambda.validate_on(w.grid.horizon())?;
    let values = w
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| v + lambda.integral(0.0, w.grid.node(i)))
        .collect();
    SamplePath::new(w.grid, values, "W_tilde")
}
