use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracporo_cli::scenario::parse_scenario;
use fracporo_cli::{experiment, verify, CliError, CliResult};

/// Time-fractional poroelasticity: fine reference and multiscale solvers.
#[derive(Parser)]
#[command(name = "fracporo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fine reference plus multiscale sweep with error tables and VTK output.
    Run(Common),
    /// Fine reference solution only.
    Fine(Common),
    /// Dump the multiscale spaces (Matrix Market) and local spectra.
    Basis(Common),
    /// Fractional-decay convergence and manufactured-solution checks.
    Verify {
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's `output` entry.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the per-patch offline work.
    #[arg(long)]
    threads: Option<usize>,
}

fn set_threads(n: Option<usize>) -> CliResult<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Scenario("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main_inner(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Verify { threads } => {
            set_threads(threads)?;
            let checks = verify::run_checks()?;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            Ok(checks.iter().all(|c| c.passed))
        }
        Command::Run(c) => scenario_command("run", c),
        Command::Fine(c) => scenario_command("fine", c),
        Command::Basis(c) => scenario_command("basis", c),
    }
}

fn scenario_command(kind: &str, c: Common) -> CliResult<bool> {
    set_threads(c.threads)?;
    let sc = parse_scenario(&c.scenario)?;
    let out = c.out.unwrap_or_else(|| sc.output_dir());
    let files = match kind {
        "run" => {
            let s = experiment::run_experiment(&sc, &out)?;
            for case in &s.cases {
                println!("case {}", case.label);
                let table =
                    fracporo::analysis::format_error_table(&case.report).map_err(|source| {
                        CliError::Core {
                            stage: "formatting the error table",
                            source,
                        }
                    })?;
                print!("{table}");
            }
            s.files
        }
        "fine" => experiment::run_fine(&sc, &out)?,
        _ => experiment::run_basis(&sc, &out)?,
    };
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(true)
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
