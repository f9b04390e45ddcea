use std::path::PathBuf;
use std::process::ExitCode;

use betavqe::runner::{self, Overrides, RunConfig};
use betavqe::Error;
use clap::{Args, Parser, Subcommand};

/// Thermal states of transverse-field Ising grids from an autoregressive
/// network feeding a variational circuit.
#[derive(Parser, Debug)]
#[command(name = "betavqe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train at a single beta and write the loss trajectory and checkpoints.
    Train(Common),
    /// Train once per beta in `beta_list` and tabulate thermal observables.
    Sweep(Common),
    /// Sample a trained model and tabulate circuit energies per bit string.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Directory holding `made.json` and `theta.json` from a previous run.
        #[arg(long, value_name = "DIR")]
        checkpoint: Option<PathBuf>,
    },
    /// Dump exact-diagonalization reference values.
    Oracle(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override `train.seed`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Force exact enumeration for small systems.
    #[arg(long)]
    deterministic: bool,
    /// Override `output.directory`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut config = RunConfig::load(&self.config)?;
        config.apply(&Overrides { seed: self.seed, deterministic: self.deterministic, out: self.out.clone() });
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    runner::init_threads_from_env()?;
    match cli.command {
        Command::Train(c) => {
            let config = c.load()?;
            for s in runner::cmd_train(&config)? {
                let last = s.trajectory.last().expect("at least the initial row");
                match s.exact_free_energy {
                    Some(exact) => println!(
                        "gamma={} epoch={} loss={:.6} stderr={:.2e} exact={exact:.6}",
                        s.gamma, last.epoch, last.loss, last.stderr
                    ),
                    None => println!(
                        "gamma={} epoch={} loss={:.6} stderr={:.2e}",
                        s.gamma, last.epoch, last.loss, last.stderr
                    ),
                }
            }
            eprintln!("wrote {}", config.output.directory.display());
        }
        Command::Sweep(c) => {
            let config = c.load()?;
            let rows = runner::cmd_sweep(&config)?;
            eprintln!("{} observable rows written to {}", rows.len(), config.output.directory.display());
        }
        Command::Spectrum { common, checkpoint } => {
            let config = common.load()?;
            let rows = runner::cmd_spectrum(&config, checkpoint.as_deref())?;
            eprintln!("{} spectrum rows written to {}", rows.len(), config.output.directory.display());
        }
        Command::Oracle(c) => {
            let config = c.load()?;
            let rows = runner::cmd_oracle(&config)?;
            eprintln!("{} reference rows written to {}", rows.len(), config.output.directory.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } | Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
