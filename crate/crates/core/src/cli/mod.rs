//! Batch front end behind the `rwre` binary.
//!
//! Output is one record per line (JSON) or a fixed-column CSV; see
//! `schema/csv-columns.md` at the repository root. Results are collected in
//! task order, so output depends only on the config and seed.

mod commands;
pub mod config;
pub mod records;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
pub use config::{EtaConfig, RunConfig};
pub use records::{Emitter, Format, Record};

#[derive(Debug, Parser)]
#[command(name = "rwre", version, about = "Boundary-face random walks in random environments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Memory budget for DP state, in MiB.
    #[arg(long, global = true, default_value_t = 1024)]
    pub budget_mb: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Face minimizer, annealed rate and Legendre tilt at a boundary point.
    Rate,
    /// Point probabilities, partition function, second moment and D_n.
    Exact {
        /// Cross-check the DP against path-by-path enumeration.
        #[arg(long)]
        oracle: bool,
    },
    /// Collision Green function with Khasminskii and Fourier bounds.
    Green,
    /// D_n(eps) sweep with a critical-disorder bracket.
    Phase,
    /// Quenched trajectories and the face event frequency.
    Simulate {
        /// CSV file for the first trajectories (walk, step, coordinates, jump).
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Check the configuration against the environment assumptions.
    Validate,
}

fn open_out(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Runs one invocation; output is written only when the command succeeds,
/// except for `validate`, whose report is written before a failing exit.
pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.common.workers {
        if w == 0 {
            return Err(Error::invalid("--workers must be positive"));
        }
        // Ignore the error when a pool already exists (repeated calls in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let budget = cli.common.budget_mb as u128 * (1 << 20);
    let mut out = Emitter::new(cfg.hash(), cfg.seed);
    let format = cli.common.format;
    match &cli.command {
        Command::Rate => commands::rate(&cfg, &mut out)?,
        Command::Exact { oracle } => commands::exact(&cfg, budget, *oracle, &mut out)?,
        Command::Green => commands::green(&cfg, budget, &mut out)?,
        Command::Simulate { trajectories } => commands::simulate(&cfg, trajectories.as_ref(), &mut out)?,
        Command::Validate => {
            let res = commands::validate(&cfg, &mut out);
            out.write(format, open_out(cli.common.out.as_ref())?)?;
            return res;
        }
        Command::Phase => {
            let res = commands::phase(&cfg, budget, &mut out)?;
            if format == Format::Csv {
                res.scan.write_csv(open_out(cli.common.out.as_ref())?)?;
                if let Some(p) = &cli.common.out {
                    let mut side = p.clone().into_os_string();
                    side.push(".json");
                    out.write(Format::Json, BufWriter::new(File::create(PathBuf::from(side))?))?;
                }
                return Ok(());
            }
        }
    }
    out.write(format, open_out(cli.common.out.as_ref())?)
}

/// Structured error line for stderr.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({"error": e.to_string(), "exit_code": e.exit_code()}).to_string()
}
