use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use szilard_cli::output::summary_table;
use szilard_cli::{parse_scenario, run_command, scan_command, scan_summary, CliError, Format, Overrides};
use szilard_core::engine::ScanFamily;

#[derive(Parser)]
#[command(name = "szilard", version, about = "Run measurement-powered quantum Szilard engine scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (every sweep point) and write the results.
    Run {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Artifact path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "SZILARD_SEED")]
        seed: Option<u64>,
        /// Weight-entropy tolerance for Feature 2.
        #[arg(long = "tol-s", env = "SZILARD_TOL_S")]
        tol_s: Option<f64>,
        /// Boltzmann constant in the units of the Hamiltonians.
        #[arg(long, env = "SZILARD_KB")]
        kb: Option<f64>,
        /// Emit (sweep value, outcome, W_x, ΔS_W) rows only.
        #[arg(long)]
        plot: bool,
    },
    /// Seeded scan of random conforming engines for the three-feature exclusion.
    Scan {
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, env = "SZILARD_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "mixed")]
        family: ScanFamily,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { file, format, out, seed, tol_s, kb, plot } => {
            let overrides = Overrides { seed, tol_s, k_b: kb };
            let batch = match parse_scenario(&file, &overrides) {
                Ok(b) => b,
                Err(e) => return report(&e),
            };
            let format = format.or(batch.output.format).unwrap_or_default();
            let out = out.or_else(|| batch.output.path.clone());
            let plot = plot || batch.output.plot;
            match run_command(&batch.points, format, out.as_deref(), plot) {
                Ok((records, code)) => {
                    let table = summary_table(&records);
                    if out.is_some() {
                        print!("{table}");
                    } else {
                        eprint!("{table}");
                    }
                    ExitCode::from(code as u8)
                }
                Err(e) => report(&e),
            }
        }
        Command::Scan { count, seed, family, format, out } => {
            match scan_command(family, count, seed, format, out.as_deref()) {
                Ok((r, code)) => {
                    let line = scan_summary(&r);
                    if out.is_some() {
                        print!("{line}");
                    } else {
                        eprint!("{line}");
                    }
                    ExitCode::from(code as u8)
                }
                Err(e) => report(&e),
            }
        }
    }
}
