use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lcsk::{commands, CliError, Context, RunConfig};

/// Finite-time Lyapunov exponents and Lagrangian coherent structures of
/// two-dimensional flows.
#[derive(Debug, Parser)]
#[command(name = "lcsk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set time.duration=20`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (overrides `run.threads`; 0 uses all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward/backward FTLE, singular values and directions on the grid.
    Ftle,
    /// Strainlines and stretchlines from the configured seeds.
    Lines,
    /// Generalized extrema of scalar fields along singular directions.
    Extrema,
    /// Residual suites; writes verify.json.
    Verify,
    /// Print the effective configuration as TOML.
    DumpConfig,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(dir) = cli.out {
        config.output.dir = dir;
    }
    if let Some(n) = cli.threads {
        config.run.threads = n;
    }
    if let Command::DumpConfig = cli.command {
        print!("{}", config.to_toml());
        return Ok(());
    }
    let ctx = Context::new(config)?;
    match cli.command {
        Command::Ftle => commands::ftle(&ctx),
        Command::Lines => {
            for (i, c) in commands::lines(&ctx)?.iter().enumerate() {
                println!(
                    "curve {i}: {} vertices, length {:.4}, {}",
                    c.len(),
                    c.arclength,
                    c.classification.as_str()
                );
            }
            Ok(())
        }
        Command::Extrema => {
            for (name, found) in commands::extrema(&ctx)? {
                println!("{name}: {} points", found.len());
            }
            Ok(())
        }
        Command::Verify => {
            let result = commands::verify(&ctx);
            if let Ok(report) = &result {
                for s in &report.suites {
                    println!("{:<20} {:?}", s.name, s.status);
                }
            }
            result.map(|_| ())
        }
        Command::DumpConfig => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lcsk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
