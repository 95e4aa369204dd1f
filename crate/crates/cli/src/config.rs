//! Per-subcommand knobs. Every knob is optional on the command line; a
//! config file (keys are flag names) fills the gaps, then defaults fill the
//! rest. The fully resolved knob set is what reports echo.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use qcd::clark_ocone::default_cutoff;
use qcd::deterministic::DeterministicFn;
use qcd::payoff::Payoff;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags that shape where output goes but never what it contains.
#[derive(Debug, Clone, Default, Args)]
pub struct IoArgs {
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Config file (TOML or JSON) keyed by flag name; a JSON report's
    /// embedded config is accepted too.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads (falls back to QCDSIM_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
}

pub trait Knobs: Serialize + DeserializeOwned + Sized + Sync {
    const COMMAND: &'static str;
    fn resolve(&mut self);
    fn format(&self) -> Format;
}

fn read_config_file(path: &Path, command: &str) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let value: Value = if is_toml {
        let t: toml::Value = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        serde_json::to_value(t).map_err(|e| CliError::Validation(e.to_string()))?
    } else {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
    };
    let mut map = match value {
        Value::Object(mut m) => match m.remove("config") {
            Some(Value::Object(inner)) => inner,
            Some(_) => return Err(CliError::Validation("\"config\" must be a table".into())),
            None => m,
        },
        _ => return Err(CliError::Validation("config file must hold a table".into())),
    };
    if let Some(c) = map.remove("command") {
        if c.as_str() != Some(command) {
            return Err(CliError::Validation(format!(
                "config file is for {c}, not {command}"
            )));
        }
    }
    Ok(map)
}

/// Command line over config file over defaults.
pub fn resolve<K: Knobs>(cli: K, config: Option<&Path>) -> Result<K, CliError> {
    let mut merged = match serde_json::to_value(&cli) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("knob structs serialize to objects"),
    };
    if let Some(path) = config {
        for (k, v) in read_config_file(path, K::COMMAND)? {
            merged.entry(k).or_insert(v);
        }
    }
    let mut knobs: K = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Validation(format!("config: {e}")))?;
    knobs.resolve();
    Ok(knobs)
}

pub fn echo<K: Knobs>(knobs: &K) -> Value {
    let mut v = serde_json::to_value(knobs).expect("knobs serialize");
    if let Value::Object(m) = &mut v {
        m.insert("command".into(), Value::from(K::COMMAND));
    }
    v
}

macro_rules! knob_struct {
    (
        $(#[$meta:meta])*
        $name:ident, $command:literal, $fmt:expr;
        $( $(#[$fmeta:meta])* $field:ident : $ty:ty $(= $default:expr)? ),* $(,)?
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
        #[serde(rename_all = "kebab-case", deny_unknown_fields)]
        pub struct $name {
            $(
                $(#[$fmeta])*
                #[arg(long)]
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
            /// Output format.
            #[arg(long, value_enum)]
            #[serde(default, skip_serializing_if = "Option::is_none")]
            pub format: Option<Format>,
        }

        impl Knobs for $name {
            const COMMAND: &'static str = $command;

            fn resolve(&mut self) {
                $($(
                    if self.$field.is_none() {
                        let d = ($default)(&*self);
                        self.$field = Some(d);
                    }
                )?)*
                self.format.get_or_insert($fmt);
            }

            fn format(&self) -> Format {
                self.format.unwrap_or($fmt)
            }
        }
    };
}

fn unit_horizon<K>(_: &K) -> f64 {
    1.0
}

fn zero<K>(_: &K) -> f64 {
    0.0
}

fn seed0<K>(_: &K) -> u64 {
    0
}

knob_struct! {
    PathsKnobs, "paths", Format::Csv;
    /// RNG seed.
    seed: u64 = seed0,
    /// Number of paths M.
    paths: usize = |_: &PathsKnobs| 4,
    /// Grid steps N.
    steps: usize = |_: &PathsKnobs| 1024,
    /// Horizon T.
    horizon: f64 = unit_horizon,
    /// Start point W_0.
    start: f64 = zero,
}

knob_struct! {
    VerifyQcdKnobs, "verify-qcd", Format::Csv;
    /// RNG seed.
    seed: u64 = seed0,
    /// Paths averaged per node.
    paths: usize = |_: &VerifyQcdKnobs| 1,
    /// Grid steps N.
    steps: usize = |_: &VerifyQcdKnobs| 1 << 14,
    /// Horizon T.
    horizon: f64 = unit_horizon,
    /// Start point W_0 = x.
    start: f64 = zero,
    /// Half-width k of the strong estimator in grid steps (default ≈ 1/√dt).
    window_k: usize = |k: &VerifyQcdKnobs| {
        let dt = k.horizon.unwrap_or(1.0) / k.steps.unwrap_or(1) as f64;
        (1.0 / dt.sqrt()).round().max(1.0) as usize
    },
    /// Process S: w, drift:c, ito-u or scaled:σ.
    process: String = |_: &VerifyQcdKnobs| "w".to_string(),
}

knob_struct! {
    ClarkOconeKnobs, "clark-ocone", Format::Json;
    /// Payoff of W_T: indicator:K, identity, square, sin, cos, exp:c or poly:c0,c1,...
    payoff: Payoff = |_: &ClarkOconeKnobs| Payoff::Indicator { strike: 0.5 },
    /// Market price of risk for the change-of-measure variant.
    lambda: DeterministicFn,
    /// RNG seed.
    seed: u64 = seed0,
    /// Number of paths M.
    paths: usize = |_: &ClarkOconeKnobs| 1000,
    /// Grid steps N.
    steps: usize = |_: &ClarkOconeKnobs| 4096,
    /// Horizon T.
    horizon: f64 = unit_horizon,
    /// Start point W_0 = x.
    start: f64 = zero,
    /// Near-expiry cutoff ε (default 1e-4 T).
    eps: f64 = |k: &ClarkOconeKnobs| default_cutoff(k.horizon.unwrap_or(1.0)),
}

knob_struct! {
    ChaosKnobs, "chaos", Format::Csv;
    /// Indicator strike K.
    strike: f64 = zero,
    /// Start point W_0 = x.
    start: f64 = zero,
    /// Horizon T.
    horizon: f64 = unit_horizon,
    /// Highest chaos order kept.
    truncate: usize = |_: &ChaosKnobs| 15,
    /// Expand in W~ = W + ∫λ instead of W.
    lambda: DeterministicFn,
    /// Paths for the reconstruction check (0 skips it).
    paths: usize = |_: &ChaosKnobs| 0,
    /// Grid steps N.
    steps: usize = |_: &ChaosKnobs| 4096,
    /// RNG seed.
    seed: u64 = seed0,
}

knob_struct! {
    HedgeKnobs, "hedge", Format::Csv;
    /// Stock drift b(t).
    b: DeterministicFn = |_: &HedgeKnobs| DeterministicFn::Const(0.05),
    /// Volatility a(t).
    a: DeterministicFn = |_: &HedgeKnobs| DeterministicFn::Const(0.2),
    /// Interest rate r(t).
    r: DeterministicFn = |_: &HedgeKnobs| DeterministicFn::Const(0.01),
    /// Strike on W_T.
    strike: f64 = |_: &HedgeKnobs| 0.5,
    /// Initial stock price.
    p0: f64 = |_: &HedgeKnobs| 1.0,
    /// Start point W_0 = x.
    start: f64 = zero,
    /// Horizon T.
    horizon: f64 = unit_horizon,
    /// Number of paths M.
    paths: usize = |_: &HedgeKnobs| 1000,
    /// Grid steps N.
    steps: usize = |_: &HedgeKnobs| 1024,
    /// Rebalances per horizon, comma separated.
    #[arg(value_delimiter = ',')]
    freqs: Vec<usize> = |_: &HedgeKnobs| vec![64, 256, 1024],
    /// RNG seed.
    seed: u64 = seed0,
    /// Near-expiry cutoff ε (default 1e-4 T).
    eps: f64 = |k: &HedgeKnobs| default_cutoff(k.horizon.unwrap_or(1.0)),
}

knob_struct! {
    HeatCheckKnobs, "heat-check", Format::Csv;
    /// Highest derivative order checked.
    max_order: usize = |_: &HeatCheckKnobs| 4,
}

knob_struct! {
    GirsanovKnobs, "girsanov", Format::Json;
    /// Market price of risk λ(t): const:c, linear:c0,c1 or a bare number.
    lambda: DeterministicFn = |_: &GirsanovKnobs| DeterministicFn::Const(0.5),
    /// Payoff of W_T: indicator:K, identity, square, sin, cos, exp:c or poly:c0,c1,...
    payoff: Payoff = |_: &GirsanovKnobs| Payoff::Indicator { strike: 0.5 },
    /// RNG seed.
    seed: u64 = seed0,
    /// Number of paths M.
    paths: usize = |_: &GirsanovKnobs| 10_000,
    /// Grid steps N.
    steps: usize = |_: &GirsanovKnobs| 1024,
    /// Horizon T.
    horizon: f64 = unit_horizon,
    /// Start point W_0 = x.
    start: f64 = zero,
}
