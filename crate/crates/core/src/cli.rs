//! The `qst` command line.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::{parse_grid, ExperimentConfig};
use crate::pipeline::{eval_to_file, gen_data, train_run, EvalRequest, Quantity};
use crate::suites::{run_suite, Scale, Suite};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "QST_THREADS";

#[derive(Debug, Parser)]
#[command(name = "qst", version, about = "Parametric tomography of transverse-field Ising ground states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve each support exactly, write reference states and sample measurements.
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory (default: <output_dir>/data).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model on a dataset directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Run directory for checkpoint and metrics (default: <output_dir>/train).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a field grid.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// observables, overlap, chi-f or renyi.
        #[arg(long)]
        what: String,
        /// `lo:hi:count` or a comma list; `supports` uses the checkpoint's supports.
        #[arg(long, default_value = "supports")]
        grid: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        gibbs_k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Entropy subsystems as `;`-separated site lists, e.g. `0,1;0,1,2`.
        #[arg(long)]
        subsystems: Option<String>,
        /// Directory holding reference-state files; without it references are
        /// recomputed exactly.
        #[arg(long)]
        references: Option<PathBuf>,
        /// Omit the exact reference column.
        #[arg(long)]
        no_reference: bool,
        /// Results CSV (default: results_<what>.csv next to the checkpoint).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a reproduction suite end to end.
    Reproduce {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: PathBuf,
        /// full or quick.
        #[arg(long, default_value = "full")]
        scale: String,
    },
}

fn parse_subsystems(text: &str) -> Result<Vec<Vec<usize>>> {
    text.split(';')
        .map(|part| {
            let part = part.trim();
            if part.is_empty() {
                return Ok(Vec::new());
            }
            part.split(',')
                .map(|i| {
                    i.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("subsystem site {i:?} is not an index")))
                })
                .collect()
        })
        .collect()
}

/// Worker cap from the environment; unset or empty means no cap.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    crate::exec::init_global_pool(threads_from_env()?);
    match cli.command {
        Command::GenData { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.join("data"));
            let data = gen_data(&cfg, &dir)?;
            println!("wrote {} records to {}", data.dataset.records.len(), dir.display());
        }
        Command::Train { config, data, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.join("train"));
            let run = train_run(&cfg, &data, &dir)?;
            if let Some(last) = run.metrics.last() {
                match last.kl_exact {
                    Some(kl) => println!("epoch {}: mean KL {kl:.5}", last.epoch),
                    None => println!("epoch {}: mean free energy {:.5}", last.epoch, last.mean_pos_free_energy),
                }
            }
            println!("checkpoint {} (sha256 {})", run.checkpoint.display(), run.sha256);
        }
        Command::Eval {
            checkpoint,
            what,
            grid,
            samples,
            gibbs_k,
            seed,
            subsystems,
            references,
            no_reference,
            out,
        } => {
            let what: Quantity = what.parse()?;
            let grid = if grid == "supports" {
                crate::io::load_checkpoint(&checkpoint)?.meta.supports
            } else {
                parse_grid(&grid)?
            };
            let req = EvalRequest {
                what,
                grid,
                samples,
                gibbs_k,
                seed,
                subsystems: subsystems.as_deref().map(parse_subsystems).transpose()?,
                references,
                skip_reference: no_reference,
            };
            let out = out.unwrap_or_else(|| {
                let dir = checkpoint.parent().map(PathBuf::from).unwrap_or_default();
                dir.join(format!("results_{}.csv", what.name()))
            });
            let evaluation = eval_to_file(&checkpoint, &req, &out)?;
            println!("wrote {} rows to {}", evaluation.table.rows.len(), out.display());
        }
        Command::Reproduce { suite, out, scale } => {
            let suite: Suite = suite.parse()?;
            let scale: Scale = scale.parse()?;
            run_suite(suite, &out, scale)?;
            println!("suite {} written to {}", suite.name(), out.display());
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsystem_lists() {
        assert_eq!(parse_subsystems("0,1;2").unwrap(), vec![vec![0, 1], vec![2]]);
        assert_eq!(parse_subsystems(";0").unwrap(), vec![vec![], vec![0]]);
        assert!(parse_subsystems("a").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["qst", "frobnicate"]), 1);
        assert_eq!(main_with_args(["qst", "eval", "--checkpoint", "x.json"]), 1);
        assert_eq!(main_with_args(["qst", "reproduce", "--suite", "nope", "--out", "/tmp/x"]), 1);
    }
}
