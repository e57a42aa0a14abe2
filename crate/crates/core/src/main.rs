use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nlmech::config::{ExperimentConfig, Kind, SeedBranch};
use nlmech::error::Error;
use nlmech::export::export;
use nlmech::runner::run;

const EXIT_INVALID: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_FAILED: u8 = 1;

#[derive(Parser)]
#[command(name = "nlmech", version, about = "Duffing resonator experiments from configuration files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic response branches, optionally checked by integration.
    Steady(RunArgs),
    /// Virtual network-analyzer sweeps at one or more drive levels.
    Sweep(RunArgs),
    /// Forced then free evolution, demodulated at the natural frequency.
    Ringdown(RunArgs),
    /// Probe response of a pumped mode.
    Pumpprobe(RunArgs),
    /// Mode-2 resonance versus the stop frequency of a mode-1 sweep.
    Intermodal(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file, or a metadata sidecar from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: output.dir from the config, else ".").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep every n-th sample of carrier-rate series.
    #[arg(long)]
    downsample: Option<usize>,
    /// Branch used to seed time-domain runs.
    #[arg(long, value_enum)]
    seed_branch: Option<BranchArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Upper,
    Lower,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Steady(a) => (Kind::Steady, a),
        Command::Sweep(a) => (Kind::Sweep, a),
        Command::Ringdown(a) => (Kind::Ringdown, a),
        Command::Pumpprobe(a) => (Kind::Pumpprobe, a),
        Command::Intermodal(a) => (Kind::Intermodal, a),
    };

    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let mut config = match ExperimentConfig::from_toml_str(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_INVALID);
        }
    };
    if config.kind != kind {
        eprintln!(
            "error: {}: kind: configuration describes a {} experiment, not {}",
            args.config.display(),
            config.kind.as_str(),
            kind.as_str()
        );
        return ExitCode::from(EXIT_INVALID);
    }
    if let Some(n) = args.downsample {
        config.output.downsample = n;
    }
    if let Some(b) = args.seed_branch {
        config.output.seed_branch = Some(match b {
            BranchArg::Upper => SeedBranch::Upper,
            BranchArg::Lower => SeedBranch::Lower,
        });
    }
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_INVALID);
    }
    let out = args
        .out
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let output = match run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(match e {
                Error::InvalidInput(_) => EXIT_INVALID,
                Error::Divergence { .. } => EXIT_DIVERGED,
                _ => EXIT_FAILED,
            });
        }
    };
    match export(&out, &config, &output) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: writing {}: {e}", out.display());
            ExitCode::from(EXIT_FAILED)
        }
    }
}
