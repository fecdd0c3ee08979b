use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sawtooth_cli::{load_echo, run, CliError, Experiment, ExperimentConfig, RunOptions, Settings};

#[derive(Parser, Debug)]
#[command(name = "sawtooth", version, about = "Classical and quantum sawtooth map experiments")]
struct Cli {
    /// Output directory (default: $SAWTOOTH_OUT, else ./sawtooth-out/<experiment>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write the iteration circuit as JSON lines.
    #[arg(long, global = true)]
    emit_circuit: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ensemble spreading and diffusion fit of the classical map.
    ClassicalDiffusion(ExperimentArgs),
    /// Phase-space density of a classical ensemble.
    PhaseSpace(ExperimentArgs),
    /// Time-averaged momentum profile and localization-length fits.
    Localization(ExperimentArgs),
    /// Compare the gate circuit against the split-operator evolution.
    CircuitVerify(ExperimentArgs),
    /// Quantum momentum spreading over time.
    Msd(ExperimentArgs),
    /// Rotation frequency of a wavepacket in the main island.
    IslandFrequency(ExperimentArgs),
    /// Time-averaged Husimi distribution.
    Husimi(ExperimentArgs),
    /// Run the experiment named in a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-run from a `config.json` written by an earlier run.
    Replay { echo: PathBuf },
}

#[derive(clap::Args, Debug)]
struct ExperimentArgs {
    /// JSON file with base settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

fn resolve(experiment: Experiment, args: ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let base = match &args.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    if let Some(named) = base.experiment {
        if named != experiment {
            return Err(CliError::config(
                "experiment",
                format!("config file is for {named}, not {experiment}"),
            ));
        }
    }
    ExperimentConfig::resolve(experiment, base.merged(args.settings))
}

fn default_out(experiment: Experiment) -> PathBuf {
    match std::env::var_os(sawtooth_cli::OUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from("sawtooth-out").join(experiment.name()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config("threads", e.to_string()))?;
    }
    let (config, out) = match cli.command {
        Command::Replay { echo } => {
            let config = load_echo(&echo)?;
            if config.version != sawtooth_cli::VERSION {
                eprintln!(
                    "warning: config written by version {}, replaying with {}",
                    config.version,
                    sawtooth_cli::VERSION
                );
            }
            // resolving again re-checks the echo and keeps it unchanged
            let config = ExperimentConfig {
                version: config.version.clone(),
                ..ExperimentConfig::resolve(config.experiment, config.settings)?
            };
            let out = cli.out.unwrap_or_else(|| {
                echo.parent().unwrap_or(std::path::Path::new(".")).join("replay")
            });
            (config, out)
        }
        Command::Run { config } => {
            let settings = Settings::load(&config)?;
            let experiment = settings
                .experiment
                .ok_or_else(|| CliError::config("experiment", "config file must name an experiment"))?;
            let resolved = ExperimentConfig::resolve(experiment, settings)?;
            let out = cli.out.unwrap_or_else(|| default_out(experiment));
            (resolved, out)
        }
        command => {
            let (experiment, args) = match command {
                Command::ClassicalDiffusion(a) => (Experiment::ClassicalDiffusion, a),
                Command::PhaseSpace(a) => (Experiment::PhaseSpace, a),
                Command::Localization(a) => (Experiment::Localization, a),
                Command::CircuitVerify(a) => (Experiment::CircuitVerify, a),
                Command::Msd(a) => (Experiment::Msd, a),
                Command::IslandFrequency(a) => (Experiment::IslandFrequency, a),
                Command::Husimi(a) => (Experiment::Husimi, a),
                Command::Run { .. } | Command::Replay { .. } => unreachable!(),
            };
            let config = resolve(experiment, args)?;
            let out = cli.out.unwrap_or_else(|| default_out(experiment));
            (config, out)
        }
    };
    let summary = run(
        &config,
        &out,
        &RunOptions {
            emit_circuit: cli.emit_circuit,
        },
    )?;
    println!("{}", serde_json::to_string(&summary.results).expect("results serialize"));
    eprintln!("wrote {} artifacts to {}", summary.artifacts.len() + 3, out.display());
    Ok(())
}
