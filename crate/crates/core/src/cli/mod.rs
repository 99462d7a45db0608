//! Batch commands wiring the library into a CSV-in, CSV-out pipeline.
//!
//! Each command reads a [`RunConfig`], writes its reports into the configured
//! output directory, and records a `manifest.csv` with the configuration hash,
//! the seed and the crate version. Outputs are byte-identical across runs and
//! thread counts for the same configuration.

mod commands;
mod config;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

pub use commands::{cmd_backtest, cmd_calibrate, cmd_gof, cmd_price, cmd_revenue, cmd_simulate};
pub use config::{RunConfig, KNOWN_KEYS};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Calibrate,
    Gof,
    Price,
    Backtest,
    Revenue,
    Simulate,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Calibrate,
        Command::Gof,
        Command::Price,
        Command::Backtest,
        Command::Revenue,
        Command::Simulate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Calibrate => "calibrate",
            Command::Gof => "gof",
            Command::Price => "price",
            Command::Backtest => "backtest",
            Command::Revenue => "revenue",
            Command::Simulate => "simulate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown command '{s}'")))
    }
}

/// Files written by a command, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    /// One-line human-readable result.
    pub message: String,
}

/// Runs `command`, honouring the config's `threads` key (or `threads`
/// overriding it when given).
pub fn run(command: Command, cfg: &RunConfig, threads: Option<usize>) -> Result<RunSummary> {
    let threads = match threads {
        Some(t) => Some(t),
        None => cfg.threads()?,
    };
    match threads {
        Some(0) => Err(Error::invalid("threads must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start {n} threads: {e}")))?
            .install(|| dispatch(command, cfg)),
        None => dispatch(command, cfg),
    }
}

fn dispatch(command: Command, cfg: &RunConfig) -> Result<RunSummary> {
    match command {
        Command::Calibrate => cmd_calibrate(cfg),
        Command::Gof => cmd_gof(cfg),
        Command::Price => cmd_price(cfg),
        Command::Backtest => cmd_backtest(cfg),
        Command::Revenue => cmd_revenue(cfg),
        Command::Simulate => cmd_simulate(cfg),
    }
}

/// Hex SHA-256 of the canonical config text.
pub fn config_hash(cfg: &RunConfig) -> String {
    Sha256::digest(cfg.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output files in a directory and finishes with a manifest.
pub(crate) struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub(crate) fn new(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.output_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub(crate) fn write<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub(crate) fn finish(mut self, command: Command, cfg: &RunConfig, message: String) -> Result<RunSummary> {
        let seed = cfg.get("seed").unwrap_or("none").to_string();
        let files = self.files.join(";");
        let hash = config_hash(cfg);
        self.write("manifest.csv", |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["key", "value"])?;
            for (k, v) in [
                ("command", command.name()),
                ("crate", env!("CARGO_PKG_NAME")),
                ("version", env!("CARGO_PKG_VERSION")),
                ("config_sha256", hash.as_str()),
                ("seed", seed.as_str()),
                ("files", files.as_str()),
            ] {
                out.write_record([k, v])?;
            }
            out.flush().map_err(|e| Error::io("manifest", e))?;
            Ok(())
        })?;
        Ok(RunSummary {
            output_dir: self.dir,
            files: self.files,
            message,
        })
    }

    pub(crate) fn dir(&self) -> &Path {
        &self.dir
    }
}
