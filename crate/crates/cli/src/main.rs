use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmtier_cli::{parse_config, run, CliError, ExperimentConfig, Mode};

const THREADS_VAR: &str = "MMTIER_THREADS";

#[derive(Parser)]
#[command(
    name = "mmtier",
    version,
    about = "Coverage, throughput and topology of multi-hop mmWave networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (`key = value` lines); defaults apply without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed, overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials, overrides the config.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// No summary on stdout and no warnings.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Coverage sweep over the (tau, k) grid.
    Coverage,
    /// Coverage sweep plus throughput-optimal gain per threshold.
    Throughput,
    /// Dump one realization of the tiered point pattern.
    Topology,
    /// Cross-check analytics against simulation.
    Validate,
}

impl Command {
    fn mode(self) -> Mode {
        match self {
            Command::Coverage => Mode::Coverage,
            Command::Throughput => Mode::Throughput,
            Command::Topology => Mode::Topology,
            Command::Validate => Mode::Validate,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
            let parsed = parse_config(&text)?;
            for w in &parsed.warnings {
                log::warn!("{w}");
            }
            parsed.config
        }
        None => ExperimentConfig::reference_default(),
    };
    cfg.mode = cli.command.mode();
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.mc_trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_VAR} must be a positive integer, got `{value}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start {threads} worker threads: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    log::debug!("built without the parallel feature; ignoring {THREADS_VAR} = {threads}");
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    let cfg = load_config(cli)?;
    let outcome = run(&cfg, &cli.out)?;
    if !cli.quiet {
        print!("{}", outcome.summary);
        for f in &outcome.files {
            println!("wrote {}", f.display());
        }
    }
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mmtier: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
