use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lyapdecay_cli::checks::{bogovskii_check, entropy_check, CheckTable};
use lyapdecay_cli::config::{render, RunConfig};
use lyapdecay_cli::output::{format_float, read_csv};
use lyapdecay_cli::pipeline::{run_to_files, summary_lines};
use lyapdecay_cli::{load_config, CliError};
use lyapdecay_core::lyapunov::fit_decay;

#[derive(Parser)]
#[command(
    name = "lyapdecay",
    version,
    about = "Isentropic compressible Navier-Stokes on a MAC grid with Lyapunov decay diagnostics",
    after_help = after_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, select sigma, and write the diagnostics CSV with a `#` summary.
    Run {
        config: PathBuf,
        /// Also write a log-scale plot of V_sigma next to the CSV.
        #[arg(long)]
        svg: bool,
    },
    /// Check the Bogovskii solver against a dense solve, residuals and norm probes.
    BogovskiiCheck { config: PathBuf },
    /// Check the relative entropy integrand, its limits and comparison constants.
    EntropyCheck { config: PathBuf },
    /// Fit exponential decay to an existing diagnostics CSV.
    Fit {
        csv: PathBuf,
        #[arg(long)]
        window_start: f64,
        #[arg(long)]
        window_end: f64,
    },
}

fn after_help() -> String {
    format!(
        "Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 check failure.\n\n\
         Configuration files use `[section]` headers, `key = value` lines and `#` comments.\n\
         Every key is optional; the defaults are:\n\n{}",
        render(&RunConfig::default())
    )
}

fn print_table(title: &str, table: &CheckTable) -> Result<(), CliError> {
    println!("{title}");
    print!("{table}");
    if table.passed() {
        Ok(())
    } else {
        let n = table.rows.iter().filter(|r| !r.pass).count();
        Err(CliError::Check(format!("{n} of {} {title} rows failed", table.rows.len())))
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, svg } => {
            let parsed = load_config(&config)?;
            for w in &parsed.warnings {
                eprintln!("warning: {w}");
            }
            let art = run_to_files(&parsed.config, &parsed.warnings, svg)?;
            for line in summary_lines(&art.summary) {
                println!("{line}");
            }
            println!("csv = {}", parsed.config.output.csv_path);
            Ok(())
        }
        Command::BogovskiiCheck { config } => {
            let parsed = load_config(&config)?;
            print_table("bogovskii-check", &bogovskii_check(&parsed.config))
        }
        Command::EntropyCheck { config } => {
            let parsed = load_config(&config)?;
            print_table("entropy-check", &entropy_check(&parsed.config))
        }
        Command::Fit {
            csv,
            window_start,
            window_end,
        } => {
            let records = read_csv(&csv).map_err(CliError::Config)?;
            let report = fit_decay(&records, (window_start, window_end)).map_err(|e| CliError::Numerical(e.to_string()))?;
            for (name, fit) in [("V_sigma", report.v_sigma), ("energy_L2", report.energy_l2)] {
                println!(
                    "{name}: rate = {}, intercept = {}, r_squared = {}, samples = {}, excluded = {}",
                    format_float(fit.rate),
                    format_float(fit.intercept),
                    format_float(fit.r_squared),
                    fit.samples,
                    fit.excluded
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
