use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hypokernel_cli::commands::{self, CliError, Outcome, EXIT_OK, EXIT_USAGE};
use hypokernel_cli::{Suite, Task};

#[derive(Parser)]
#[command(
    name = "hypokernel",
    version,
    about = "Kernels, semigroups and fractional powers of Kolmogorov-type operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report whether the model is hypoelliptic.
    Check {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Evaluate a quantity at the configured points and write CSV.
    Eval {
        #[arg(long, value_enum)]
        what: Task,
        #[arg(short, long)]
        config: PathBuf,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run an invariant suite and print a JSON report.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(short, long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let threads = std::env::var("HYPOKERNEL_THREADS").ok();
    if let Some(n) = commands::thread_cap(threads.as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Check { config } => commands::check(&commands::load_config(&config)?),
        Command::Eval { what, config, output } => {
            commands::eval_command(&commands::load_config(&config)?, what, output.as_ref())
        }
        Command::Verify { suite, config } => commands::verify_command(&commands::load_config(&config)?, suite),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.stdout.as_bytes());
            let _ = stdout.flush();
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
