mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use elastocal::mechanics::MaterialParameters;

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "elastocal", version, about = "Parametric PINN surrogates and calibration of elastic moduli")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON); defaults to the linear-elastic desk setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Reference solutions and training snapshots.
    GenerateData,
    /// Train the surrogate; `--checkpoint` resumes from stored parameters.
    Train {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Field errors against reference solutions at held-out parameters.
    Validate {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Weighted least-squares point estimate.
    CalibrateNls {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Posterior sampling with the ensemble sampler.
    CalibrateMcmc {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Frequentist coverage of the credible intervals.
    Coverage {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Fixed-parameter training with and without symmetry shear conditions.
    BcAblation,
    /// Noisy synthetic measurement of the reference solution.
    Synthesize {
        /// Bulk and shear modulus, `K,G`.
        #[arg(long, value_parser = parse_kappa)]
        kappa: MaterialParameters,
    },
}

fn parse_kappa(s: &str) -> Result<MaterialParameters, String> {
    let (k, g) = s.split_once(',').ok_or("expected K,G")?;
    let k = k.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let g = g.trim().parse::<f64>().map_err(|e| e.to_string())?;
    MaterialParameters::new(k, g).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = RunConfig::load(cli.common.config.as_deref(), cli.common.seed)?;
    let out = &cli.common.out;
    commands::prepare_out(out, &cfg)?;
    match cli.command {
        Command::GenerateData => commands::generate_data(&cfg, out),
        Command::Train { checkpoint } => commands::train_cmd(&cfg, out, checkpoint.as_deref()).map(|_| ()),
        Command::Validate { checkpoint } => commands::validate_cmd(&cfg, &checkpoint, out),
        Command::CalibrateNls { checkpoint, data } => commands::calibrate_nls(&cfg, &checkpoint, &data, out),
        Command::CalibrateMcmc { checkpoint, data } => commands::calibrate_mcmc(&cfg, &checkpoint, &data, out),
        Command::Coverage { checkpoint } => commands::coverage(&cfg, &checkpoint, out),
        Command::BcAblation => commands::bc_ablation_cmd(&cfg, out),
        Command::Synthesize { kappa } => commands::synthesize(&cfg, kappa, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
