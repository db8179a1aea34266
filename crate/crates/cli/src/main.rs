//! `xplain`: command-line front end for the heuristic-analysis pipeline.
//!
//! Machine output goes to files under `--out` (or the primary document to
//! stdout); progress lines go to stderr.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Report;
use config::ConfigError;

#[derive(Parser)]
#[command(name = "xplain", version, about = "Find, explain and generalize heuristic performance gaps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed for every random draw.
    #[arg(long)]
    seed: u64,
    /// Worker threads (1 runs sequentially).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; without it the primary document goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run heuristic and benchmark on one input and print both allocations.
    RunHeuristic(Common),
    /// Search for an input with a large gap.
    Analyze(Common),
    /// Generate significant adversarial subspaces.
    Subspaces(Common),
    /// Per-edge decision heatmaps for a subspace.
    Explain(Common),
    /// Test a trend predicate over generated instances.
    Generalize(Common),
    /// Encode a MILP file as a flow network and compare optima.
    EncodeMilp(Common),
}

type Handler = fn(&config::Loaded, u64) -> Result<Report>;

fn write_outputs(report: &Report, out: Option<&Path>) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, body) in &report.files {
                let path = dir.join(name);
                std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            if let Some((_, body)) = report.files.get(report.primary) {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(body.as_bytes())?;
                stdout.flush()?;
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    let (common, handler): (Common, Handler) = match cli.command {
        Command::RunHeuristic(c) => (c, commands::run_heuristic),
        Command::Analyze(c) => (c, commands::analyze),
        Command::Subspaces(c) => (c, commands::subspaces),
        Command::Explain(c) => (c, commands::explain),
        Command::Generalize(c) => (c, commands::generalize),
        Command::EncodeMilp(c) => (c, commands::encode_milp_cmd),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(ConfigError("--threads must be at least 1".into()).into());
        }
        xplain_core::par::init_threads(n);
    }
    let loaded = config::load(&common.config)?;
    let out = common.out.clone().or_else(|| loaded.cfg.out.as_ref().map(|p| loaded.resolve(p)));
    let report = handler(&loaded, common.seed)?;
    write_outputs(&report, out.as_deref())?;
    Ok(report.exit)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<ConfigError>()) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
