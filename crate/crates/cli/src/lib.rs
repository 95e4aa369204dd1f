//! `qcdsim` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::Value;

pub mod commands;
pub mod config;
pub mod output;

use config::{echo, resolve, Format, IoArgs, Knobs};
use output::{to_json_line, Table};

#[derive(Debug, Parser)]
#[command(
    name = "qcdsim",
    version,
    about = "Quadratic covariation derivative simulations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump simulated Brownian paths.
    Paths {
        #[command(flatten)]
        knobs: config::PathsKnobs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Strong QCD estimates against their targets.
    VerifyQcd {
        #[command(flatten)]
        knobs: config::VerifyQcdKnobs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Martingale representation check over an ensemble.
    ClarkOcone {
        #[command(flatten)]
        knobs: config::ClarkOconeKnobs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Chaos coefficients of the Brownian indicator.
    Chaos {
        #[command(flatten)]
        knobs: config::ChaosKnobs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Digital option replication backtest.
    Hedge {
        #[command(flatten)]
        knobs: config::HedgeKnobs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Heat-kernel identity residuals.
    HeatCheck {
        #[command(flatten)]
        knobs: config::HeatCheckKnobs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Change-of-measure summary.
    Girsanov {
        #[command(flatten)]
        knobs: config::GirsanovKnobs,
        #[command(flatten)]
        io: IoArgs,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit code 2.
    Validation(String),
    /// Failure while running; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

pub(crate) fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

pub(crate) fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// What a command produced: a JSON body (merged with the config echo) and,
/// when it has one, a CSV table.
pub struct Report {
    pub json: serde_json::Map<String, Value>,
    pub table: Option<Table>,
}

/// Rendered output plus the config echo.
pub struct Rendered {
    pub body: String,
    pub config: Value,
    pub format: Format,
}

fn render<K: Knobs>(knobs: &K, report: Report) -> Rendered {
    let config = echo(knobs);
    let format = knobs.format();
    let body = match (format, report.table) {
        (Format::Csv, Some(table)) => table.to_csv(),
        _ => {
            let mut map = serde_json::Map::new();
            map.insert("config".into(), config.clone());
            map.extend(report.json);
            let mut s = to_json_line(&Value::Object(map));
            s.push('\n');
            s
        }
    };
    Rendered {
        body,
        config,
        format,
    }
}

fn thread_count(io: &IoArgs) -> Result<Option<usize>, CliError> {
    if let Some(n) = io.threads {
        return Ok(Some(n));
    }
    match std::env::var("QCDSIM_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Validation(format!("QCDSIM_THREADS={v:?} is not a count"))),
        _ => Ok(None),
    }
}

fn execute<K: Knobs>(
    knobs: K,
    io: &IoArgs,
    body: fn(&K) -> Result<Report, CliError>,
) -> Result<(Rendered, Option<PathBuf>), CliError> {
    let knobs = resolve(knobs, io.config.as_deref())?;
    let threads = thread_count(io)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(runtime)?;
    let report = pool.install(|| body(&knobs))?;
    Ok((render(&knobs, report), io.output.clone()))
}

pub fn dispatch(command: Command) -> Result<(Rendered, Option<PathBuf>), CliError> {
    match command {
        Command::Paths { knobs, io } => execute(knobs, &io, commands::paths),
        Command::VerifyQcd { knobs, io } => execute(knobs, &io, commands::verify_qcd),
        Command::ClarkOcone { knobs, io } => execute(knobs, &io, commands::clark_ocone),
        Command::Chaos { knobs, io } => execute(knobs, &io, commands::chaos),
        Command::Hedge { knobs, io } => execute(knobs, &io, commands::hedge),
        Command::HeatCheck { knobs, io } => execute(knobs, &io, commands::heat_check),
        Command::Girsanov { knobs, io } => execute(knobs, &io, commands::girsanov),
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

fn emit(
    rendered: &Rendered,
    output: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> std::io::Result<()> {
    let config_line = format!("{}\n", to_json_line(&rendered.config));
    match output {
        Some(path) => {
            std::fs::write(path, &rendered.body)?;
            if rendered.format == Format::Csv {
                std::fs::write(sidecar(path), &config_line)?;
            }
        }
        None => stdout.write_all(rendered.body.as_bytes())?,
    }
    // CSV stays a bare table, so its config travels on stderr
    if rendered.format == Format::Csv {
        stderr.write_all(config_line.as_bytes())?;
    }
    Ok(())
}

/// Parses `args` (program name first), runs, writes, and returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok((rendered, output)) => match emit(&rendered, output.as_deref(), stdout, stderr) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                1
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}
