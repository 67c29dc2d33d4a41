use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vendorest::hierarchical::{FitConfig, HierModel};
use vendorest::simulator::GenerativeModel;
use vendorest::Error;

mod commands;
mod config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Parser)]
#[command(name = "vendorest", version, about = "Street-vendor population estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimModel {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModel {
    #[value(name = "4")]
    Four,
    #[value(name = "5")]
    Five,
}

#[derive(Subcommand)]
enum Command {
    /// Ratio, subregion and subtotal estimates from survey records.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Derive overdispersion from a fixed number of vendors per market.
        #[arg(long)]
        vendors_per_market: Option<f64>,
    },
    /// Weighted estimates and bias factors under one or more weight scenarios.
    Weighted {
        #[command(flatten)]
        common: Common,
    },
    /// Draw replicate count tables from a scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: Option<SimModel>,
    },
    /// Monte Carlo coverage experiment.
    Coverage {
        #[command(flatten)]
        common: Common,
        /// Also write per-replicate rows as CSV.
        #[arg(long)]
        rows: Option<PathBuf>,
    },
    /// Fit a hierarchical model by MCMC.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: Option<FitModel>,
        #[arg(long, default_value_t = 4)]
        chains: usize,
        #[arg(long, default_value_t = 2000)]
        warmup: usize,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        thin: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Also write all draws as CSV.
        #[arg(long)]
        draws: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Estimation(_) | Error::Initialization(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(commands::Output, Common), Error> {
    Ok(match cli.command {
        Command::Estimate {
            common,
            vendors_per_market,
        } => (commands::estimate(&common.config, common.format, vendors_per_market)?, common),
        Command::Weighted { common } => (commands::weighted(&common.config, common.format)?, common),
        Command::Simulate { common, model } => {
            let model = model.map(|m| match m {
                SimModel::One => GenerativeModel::Model1,
                SimModel::Two => GenerativeModel::Model2,
                SimModel::Three => GenerativeModel::Model3,
            });
            (commands::simulate(&common.config, common.format, common.seed, model)?, common)
        }
        Command::Coverage { common, rows } => (
            commands::coverage(&common.config, common.format, common.seed, rows.as_deref())?,
            common,
        ),
        Command::Fit {
            common,
            model,
            chains,
            warmup,
            iters,
            thin,
            level,
            draws,
        } => {
            let config = FitConfig {
                chains,
                warmup,
                iters,
                thin,
                seed: common.seed.unwrap_or(FitConfig::default().seed),
                ..FitConfig::default()
            };
            let opts = commands::FitOptions {
                model: model.map(|m| match m {
                    FitModel::Four => HierModel::Model4,
                    FitModel::Five => HierModel::Model5,
                }),
                config,
                level,
                draws_out: draws,
            };
            (commands::fit_cmd(&common.config, common.format, opts)?, common)
        }
    })
}

fn write_output(body: &str, out: Option<&PathBuf>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, body),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            if !body.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            stdout.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((output, common)) => {
            if let Err(e) = write_output(&output.body, common.out.as_ref()) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if output.degenerate {
                eprintln!("warning: some estimates are degenerate (no standard error)");
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
