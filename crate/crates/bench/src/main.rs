use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use qgsa_bench::{compare, shots_table, train, ShotsQuery};

#[derive(Parser)]
#[command(
    name = "qgsa",
    version,
    about = "Train and compare variational-circuit optimizers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write traces and a summary.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Also write loss-vs-iteration and loss-vs-circuits SVG charts.
        #[arg(long)]
        plots: bool,
        /// Output directory (default: runs/<config name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate finished runs found in a directory and plot them together.
    Compare {
        #[arg(long)]
        runs: PathBuf,
    },
    /// Print Hoeffding shot counts.
    Shots {
        #[arg(long, conflicts_with = "gap")]
        epsilon: Option<f64>,
        #[arg(long)]
        gap: Option<f64>,
        #[arg(long)]
        delta: f64,
        /// Width of the outcome interval; 2 for ±1 measurement outcomes.
        #[arg(long, requires = "epsilon")]
        range: Option<f64>,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, plots, out } => {
            let summary = train(&config, out.as_deref(), plots)?;
            println!(
                "{}: {} seeds, final loss {:.6} ± {:.6}, {} circuits, {:.2} USD ({})",
                summary.name,
                summary.runs.len(),
                summary.final_loss_mean,
                summary.final_loss_std,
                summary.total_circuits,
                summary.total_cost,
                summary.profile
            );
        }
        Command::Compare { runs } => {
            let report = compare(&runs)?;
            print!("{}", report.render());
            for plot in &report.plots {
                println!("wrote {}", plot.display());
            }
        }
        Command::Shots {
            epsilon,
            gap,
            delta,
            range,
        } => {
            let query = match (epsilon, gap) {
                (Some(epsilon), None) => ShotsQuery::Precision {
                    epsilon,
                    delta,
                    range,
                },
                (None, Some(gap)) => ShotsQuery::Descent { gap, delta },
                _ => bail!("pass either --epsilon or --gap"),
            };
            print!("{}", shots_table(query)?);
        }
    }
    Ok(())
}
