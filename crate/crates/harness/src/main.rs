use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ringlab::{
    compare_stage, configure_workers, fz_stage, run_report, simulation_stage, theory_stage, ComparisonReport, RunConfig,
    WORKERS_ENV,
};

#[derive(Parser)]
#[command(name = "ringlab", version, about = "Single ring law: theory against simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (.toml or .json).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `ensemble.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Radial density from both routes and their cross-validation.
    Theory(Common),
    /// Sample replicas and check the exact identities.
    Simulate(Common),
    /// Compare a persisted radial sample with the theory.
    Compare(Common),
    /// Sample the log-gas and compare with its equilibrium measure.
    FzSample(Common),
    /// Full run: theory, simulation, comparison and plots.
    Report(Common),
}

fn load(c: &Common) -> ringlab::Result<RunConfig> {
    let mut config = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        config = config.with_seed(seed);
    }
    if let Some(out) = &c.out {
        config = config.with_output_dir(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn run(cmd: &Command) -> ringlab::Result<ComparisonReport> {
    Ok(match cmd {
        Command::Theory(c) => theory_stage(&load(c)?)?.1,
        Command::Simulate(c) => simulation_stage(&load(c)?)?.1,
        Command::Compare(c) => compare_stage(&load(c)?)?,
        Command::FzSample(c) => fz_stage(&load(c)?)?.1,
        Command::Report(c) => {
            let out = run_report(&load(c)?)?;
            for p in &out.plots {
                log::info!("wrote {}", p.display());
            }
            out.report
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let workers = configure_workers();
    log::debug!("{workers} workers ({WORKERS_ENV})");
    match run(&cli.command) {
        Ok(report) => {
            print!("{}", report.summary());
            if report.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
