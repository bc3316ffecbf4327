use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mpps::net::{load_model, save_model};
use mpps::sim::{
    emit_results, run_oracle_suite, run_sweep, train_from_config, OutputFormat, SimConfig,
    Simulator,
};
use mpps::{Error, Result};

#[derive(Parser)]
#[command(name = "mpps", version, about = "Soft-output MIMO detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an SNR sweep and write one row per (SNR, detector).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Worker threads; 0 uses every available core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Build an exhaustively labelled dataset and fit the LLR network.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
    },
    /// Run an SNR sweep with the given network in place of `model_path`.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Run the enumeration and invariant self-checks for a configuration.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
}

fn sweep(
    cfg: SimConfig,
    model: Option<PathBuf>,
    out: PathBuf,
    format: &str,
    threads: usize,
) -> Result<()> {
    let format: OutputFormat = format.parse()?;
    let model = match model.or_else(|| cfg.model_path.as_ref().map(PathBuf::from)) {
        Some(path) => Some(load_model(path)?),
        None => None,
    };
    let sim = Simulator::new(cfg, model)?;
    let outcome = run_sweep(&sim, threads);
    emit_results(&outcome.rows, format, &out)?;
    outcome.into_result().map(|_| ())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            format,
            threads,
        } => {
            sweep(SimConfig::load(config)?, None, out, &format, threads)?;
        }
        Command::Evaluate {
            model,
            config,
            out,
            format,
            threads,
        } => {
            sweep(SimConfig::load(config)?, Some(model), out, &format, threads)?;
        }
        Command::Train { config, out_model } => {
            let cfg = SimConfig::load(config)?;
            let report = train_from_config(&cfg)?;
            save_model(&report.model, &out_model)?;
            let last = report.loss_trace.last().copied().unwrap_or(f64::NAN);
            eprintln!(
                "trained on {} samples for {} epochs, final loss {last:.6e}",
                report.n_samples,
                report.loss_trace.len()
            );
        }
        Command::Oracle { config } => {
            let checks = run_oracle_suite(&SimConfig::load(config)?)?;
            for c in &checks {
                println!("{c}");
            }
            return Ok(checks.iter().all(|c| c.passed != Some(false)));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
