use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fwsgd::pipeline::{Error, Pipeline, RunOptions};
use fwsgd::stats::{fit_text, summarize, summary_csv, verdict_text};

/// Transition-graph energies and hitting-time experiments for SGD.
#[derive(Parser)]
#[command(name = "fwsgd", version)]
struct Cli {
    /// Experiment manifest (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for simulation and numeric edge costs.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Overrides the manifest's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the manifest's output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical points, transition graph and energies.
    Analyze,
    /// Monte Carlo hitting times.
    Simulate,
    /// Log-linear fit of the hitting times.
    Fit,
    /// Fit against the theoretical energy; exits 5 on FAIL.
    Report,
    /// Minimum-action path between two critical-point ids or `x,y,..` points.
    Mam {
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    let Some(config) = cli.config else {
        return Err(fwsgd::config::ConfigError::Invalid("--config is required".into()).into());
    };
    let opts = RunOptions {
        jobs: cli.jobs,
        seed: cli.seed,
        output: cli.output,
    };
    let p = Pipeline::from_path(&config, &opts)?;
    match cli.command {
        Command::Analyze => {
            let a = p.analyze()?;
            print!("{}", a.energy.to_text());
        }
        Command::Simulate => {
            let s = p.simulate()?;
            print!("{}", summary_csv(&summarize(&s)));
        }
        Command::Fit => {
            let f = p.fit()?;
            print!("{}", fit_text(&f));
        }
        Command::Report => {
            let (f, v) = p.report()?;
            print!("{}{}", fit_text(&f), verdict_text(&v));
            if !v.pass {
                return Err(Error::Fail(Box::new(v)));
            }
        }
        Command::Mam { from, to } => {
            let r = p.mam(&from, &to)?;
            println!("action: {}", r.action);
            println!("iterations: {}", r.iterations);
            println!("horizon: {}", r.path.horizon());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fwsgd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
