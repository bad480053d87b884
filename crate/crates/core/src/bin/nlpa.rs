use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use nlpa::config::{load_config, ExperimentConfig};
use nlpa::runner::{error_exit_code, run, OutputFormat, RunOptions, Subcommand};

#[derive(Parser)]
#[command(name = "nlpa", version, about = "Spectral and energy efficiency of mmWave MIMO links with nonlinear PAs")]
struct Cli {
    /// JSON experiment configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `seeds.base_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep points and Monte Carlo blocks.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Subcommand)]
enum Command {
    /// SE and EE against input power for each Nt.
    SweepPower,
    /// SE and EE against Nt at a fixed input power.
    SweepAntennas,
    /// Normalized signal and distortion beampatterns.
    Beampattern,
    /// Single-RF EE against input power for each Nt.
    EeSweep,
    /// Energy-efficiency-optimal input power per channel.
    OptimizeEe,
    /// Digital, analog, hybrid and quantized analog transmitters.
    CompareSchemes,
    /// Oracle suite; exits 1 when a check fails.
    Validate,
    /// Print the resolved configuration as JSON.
    PrintConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => match load_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(error_exit_code(&e) as u8);
            }
        },
        None => ExperimentConfig::default(),
    };
    let sub = match cli.command {
        Command::SweepPower => Subcommand::SweepPower,
        Command::SweepAntennas => Subcommand::SweepAntennas,
        Command::Beampattern => Subcommand::Beampattern,
        Command::EeSweep => Subcommand::EeSweep,
        Command::OptimizeEe => Subcommand::OptimizeEe,
        Command::CompareSchemes => Subcommand::CompareSchemes,
        Command::Validate => Subcommand::Validate,
        Command::PrintConfig => {
            let mut cfg = cfg;
            if let Some(s) = cli.seed {
                cfg.seeds.base_seed = s;
            }
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
            return ExitCode::SUCCESS;
        }
    };
    let opts = RunOptions {
        out_dir: cli.out,
        seed: cli.seed,
        threads: cli.threads,
        format: match cli.format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        },
    };
    match run(sub, &cfg, &opts) {
        Ok(outcome) => {
            for p in &outcome.failed_points {
                eprintln!("failed point: {p}");
            }
            for c in &outcome.failed_checks {
                eprintln!("failed check: {c}");
            }
            eprintln!(
                "{}: {} rows, manifest {}",
                sub.name(),
                outcome.rows,
                outcome.manifest.display()
            );
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
