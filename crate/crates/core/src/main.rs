use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use qjump::cli::{self, RunConfig, Task, EXIT_CONFIG, EXIT_RUNTIME};
use qjump::Error;

/// Quantum-jump trajectory simulations of open quantum systems.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Configuration file (INI-style sections of key = value pairs).
    #[arg(long)]
    config: PathBuf,
    /// Task to run, overriding the configuration.
    #[arg(long)]
    task: Option<String>,
    /// Output CSV path, overriding the configuration; stdout if neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(args: &Args) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(&args.config)?;
    let mut cfg = cli::parse_config(&text)?;
    if let Some(name) = &args.task {
        cfg.task.task = Task::parse(name).ok_or_else(|| Error::Config {
            line: 0,
            reason: format!("unknown task '{name}'"),
        })?;
    }
    if let Some(seed) = args.seed {
        cfg.numerics.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &RunConfig) -> Result<i32, Error> {
    let outcome = cli::run(cfg)?;
    match &cfg.out {
        Some(path) => outcome.table.write_csv(fs::File::create(path)?)?,
        None => outcome.table.write_csv(io::stdout().lock())?,
    }
    let mut err = io::stderr().lock();
    for line in &outcome.summary {
        writeln!(err, "{line}")?;
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME as u8);
        }
    }
    let cfg = match load(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match execute(&cfg) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME as u8)
        }
    }
}
