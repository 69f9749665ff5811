use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pucci_cli::run::{load, output_dir, RunError};
use pucci_cli::suites;
use pucci_cli::{run, ExperimentConfig, RunOptions};

/// Experiments for singular/degenerate fully nonlinear elliptic equations.
#[derive(Parser)]
#[command(name = "pucci", version)]
struct Cli {
    /// Directory for solution.csv, report.csv and summary.txt.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized experiments.
    #[arg(long, global = true, default_value_t = RunOptions::default().seed)]
    seed: u64,
    /// Read suites from this directory instead of the bundled ones.
    #[arg(long, global = true)]
    suites: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a suite by name.
    Run { config: String },
    /// List the available suites.
    ListSuites,
}

fn available(dir: Option<&Path>) -> Result<Vec<suites::Suite>, RunError> {
    match dir {
        Some(d) => suites::from_dir(d).map_err(|source| RunError::Io {
            context: format!("reading {}", d.display()),
            source,
        }),
        None => Ok(suites::bundled()),
    }
}

fn resolve(target: &str, dir: Option<&Path>) -> Result<ExperimentConfig, RunError> {
    let path = Path::new(target);
    if path.is_file() {
        return load(path);
    }
    let suite = available(dir)?.into_iter().find(|s| s.name == target).ok_or_else(|| RunError::Io {
        context: format!("`{target}` is neither a config file nor a suite (see `pucci list-suites`)"),
        source: std::io::Error::from(std::io::ErrorKind::NotFound),
    })?;
    suite.parse().map_err(|error| RunError::Parse {
        path: format!("suite {}", suite.name),
        error,
    })
}

fn execute(cli: &Cli) -> Result<i32, RunError> {
    match &cli.command {
        Command::ListSuites => {
            let list = available(cli.suites.as_deref())?;
            if list.is_empty() {
                println!("no suites found");
            }
            for s in list {
                println!("{:<18} {}", s.name, s.description());
            }
            Ok(0)
        }
        Command::Run { config } => {
            let cfg = resolve(config, cli.suites.as_deref())?;
            let outcome = run(&cfg, RunOptions { seed: cli.seed })?;
            let dir = output_dir(&cfg, cli.out.as_deref());
            outcome.write(&dir)?;
            print!("{}", outcome.summary());
            println!("artifacts in {}", dir.display());
            Ok(outcome.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
