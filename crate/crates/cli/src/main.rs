use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use morrey_cli::{run, CliError, Command, ExperimentConfig};

/// Run one verification experiment and write its artifacts.
#[derive(Parser, Debug)]
#[command(name = "morrey", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// INI file overriding the command's reference experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Finest cells per axis; the resolution ladder keeps its ratios.
    #[arg(long, global = true)]
    resolution: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Weak residuals, structure, Caccioppoli and monotonicity of a fixture.
    VerifyFixture,
    /// Morrey norm, origin profile and mollified distances.
    MorreyNorm,
    /// Riesz potential of a fixture field.
    Riesz,
    /// Capacities of concentric balls and their scaling exponent.
    CapacityScaling,
    /// Hausdorff content of a segment and greedy-versus-exact covers.
    Hausdorff,
    /// Content against capacity on concentric balls.
    IsocapCheck,
    /// Oscillation, average and Riesz singular-set detectors.
    ScanSingular,
    /// Representation-formula reconstruction of a bump.
    Reconstruct,
    /// Aggregate the summaries under the output directory.
    Report,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::VerifyFixture => Command::VerifyFixture,
            Sub::MorreyNorm => Command::MorreyNorm,
            Sub::Riesz => Command::Riesz,
            Sub::CapacityScaling => Command::CapacityScaling,
            Sub::Hausdorff => Command::Hausdorff,
            Sub::IsocapCheck => Command::IsocapCheck,
            Sub::ScanSingular => Command::ScanSingular,
            Sub::Reconstruct => Command::Reconstruct,
            Sub::Report => Command::Report,
        }
    }
}

fn configure(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(cli.command.into(), cli.config.as_deref())?;
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(r) = cli.resolution {
        cfg.override_resolution(r)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match configure(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start {t} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cfg) {
        Ok(summary) if summary.passed => ExitCode::SUCCESS,
        Ok(summary) => {
            for c in summary.failed() {
                let tag = c.criterion.map(|k| format!("criterion {k}: ")).unwrap_or_default();
                eprintln!("FAILED {tag}{}: {}", c.name, c.detail);
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
