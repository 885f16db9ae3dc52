use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pvb_cli::commands;
use pvb_cli::config;
use pvb_cli::CliError;

#[derive(Parser)]
#[command(name = "pvb", version, about = "Adaptive phase-space basis solvers for the Schrodinger equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory, overriding `output.directory` in the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel assembly
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the randomized validation checks
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest eigenstates with an adaptive cell set
    Tise { config: PathBuf },
    /// Time propagation with an adaptive cell set
    Tdse { config: PathBuf },
    /// Run the invariant suite
    Validate,
    /// Time the main kernels
    Bench,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Tise { config } => {
            let cfg = config::load(&config)?;
            let out = cli.out.unwrap_or_else(|| cfg.output.directory.clone());
            let r = commands::cmd_tise(&cfg, &out)?;
            println!(
                "{} eigenvalues on {} cells after {} iterations, written to {}",
                r.result.eigenvalues.len(),
                r.result.final_cells.len(),
                r.result.iterations,
                r.out_dir.display()
            );
            for (i, e) in r.result.eigenvalues.iter().enumerate() {
                println!("{i:>4}  {e:.12}");
            }
        }
        Command::Tdse { config } => {
            let cfg = config::load(&config)?;
            let out = cli.out.unwrap_or_else(|| cfg.output.directory.clone());
            let tr = commands::cmd_tdse(&cfg, &out)?;
            let last = tr.points.last().expect("trajectory has an initial point");
            println!(
                "t = {:.6}: {} accepted, {} rejected steps, {} cells (max {}), norm {:.12}, discarded {:.3e}; written to {}",
                last.t,
                tr.accepted_steps(),
                tr.rejected_steps,
                last.n_cells,
                tr.max_cells(),
                last.norm,
                last.discarded,
                out.display()
            );
        }
        Command::Validate => {
            commands::cmd_validate(cli.seed, cli.out.as_deref(), |l| println!("{l}"))?;
        }
        Command::Bench => commands::cmd_bench(cli.out.as_deref(), |l| println!("{l}"))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
