use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fadesched::experiment::{analyze, preset, run_sweep, write_csv, ExperimentConfig};
use fadesched::Error;

#[derive(Parser)]
#[command(name = "fadesched", version, about = "Scheduling with partial channel feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write one CSV row per (value, policy, seed).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured horizon (slots).
        #[arg(long)]
        horizon: Option<u64>,
        /// Use the config's full-scale horizon.
        #[arg(long, conflicts_with = "horizon")]
        full: bool,
        /// Worker threads for replications.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// CSV output; falls back to the config's `output`, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Region membership, boundary scale and delay bound for each sweep value.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a preset config (fig1, fig2, fig3, example3a).
    Preset { name: String },
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            horizon,
            full,
            jobs,
            out,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let prepared = cfg.prepare()?;
            let horizon = if full { cfg.full_horizon.or(Some(cfg.horizon)) } else { horizon };
            let rows = run_sweep(&prepared, horizon, jobs)?;
            let target = out.or_else(|| cfg.output.clone());
            write_csv(&prepared, &rows, open_output(target.as_deref())?)
        }
        Command::Analyze { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let prepared = cfg.prepare()?;
            let report = analyze(&prepared)?;
            let mut w = open_output(out.as_deref())?;
            let text = serde_json::to_string_pretty(&report).expect("reports always serialise");
            writeln!(w, "{text}")
                .and_then(|_| w.flush())
                .map_err(|e| Error::Io {
                    path: out.unwrap_or_else(|| "stdout".into()),
                    source: e,
                })
        }
        Command::Preset { name } => {
            let cfg = preset(&name)?;
            println!("{}", cfg.to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
