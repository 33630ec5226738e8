mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use infomarkets::voting::WeightScheme;

use crate::config::{parse_weights, ExperimentConfig, Format, MarketName, Overrides};
use crate::error::Result;

/// Weighted-majority elections and information-market equilibria.
#[derive(Debug, Parser)]
#[command(name = "infomarkets", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MarketArgs {
    /// naive, kelly, taxed_asymptotic or taxed_finite.
    #[arg(long)]
    market: Option<MarketName>,
    /// Tax parameter for taxed_finite.
    #[arg(long)]
    k: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the market equilibrium.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        market: MarketArgs,
    },
    /// Run a weighted-majority election on sincere votes.
    Vote {
        #[command(flatten)]
        common: Common,
        /// egalitarian, linear or log_odds.
        #[arg(long, value_parser = parse_weights)]
        weights: Option<WeightScheme>,
    },
    /// Compare each election with its market counterpart.
    CheckEquivalence {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, value_parser = parse_weights)]
        weights: Option<WeightScheme>,
        /// Check every signal profile instead of the configured one.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Group accuracy of elections (and a market, if given).
    Accuracy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, value_parser = parse_weights)]
        weights: Option<WeightScheme>,
        /// Monte Carlo trials; exact enumeration when omitted and n is small.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Taxed-market strategies and prices over a list of k values.
    SweepK {
        #[command(flatten)]
        common: Common,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',')]
        k: Vec<f64>,
    },
    /// Cross-check solvers against the brute-force oracles.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, value_parser = parse_weights)]
        weights: Option<WeightScheme>,
    },
}

fn load(common: &Common, mut overrides: Overrides) -> Result<ExperimentConfig> {
    overrides.format = common.format;
    overrides.output = common.output.clone();
    ExperimentConfig::load(&common.config, &overrides)
}

fn with_market(m: &MarketArgs) -> Overrides {
    Overrides {
        market: m.market,
        k: m.k,
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    let (config, outcome) = match cli.command {
        Command::Solve { common, market } => {
            let c = load(&common, with_market(&market))?;
            let out = commands::cmd_solve(&c)?;
            (c, out)
        }
        Command::Vote { common, weights } => {
            let c = load(
                &common,
                Overrides {
                    weights,
                    ..Default::default()
                },
            )?;
            let out = commands::cmd_vote(&c)?;
            (c, out)
        }
        Command::CheckEquivalence {
            common,
            market,
            weights,
            exhaustive,
        } => {
            let c = load(
                &common,
                Overrides {
                    weights,
                    ..with_market(&market)
                },
            )?;
            let out = commands::cmd_check_equivalence(&c, exhaustive)?;
            (c, out)
        }
        Command::Accuracy {
            common,
            market,
            weights,
            trials,
            seed,
        } => {
            let o = Overrides {
                weights,
                trials,
                seed,
                ..with_market(&market)
            };
            let c = load(&common, o)?;
            let out = commands::cmd_accuracy(&c)?;
            (c, out)
        }
        Command::SweepK { common, k } => {
            let c = load(&common, Overrides::default())?;
            let out = commands::cmd_sweep_k(&c, &k)?;
            (c, out)
        }
        Command::Verify {
            common,
            market,
            weights,
        } => {
            let c = load(
                &common,
                Overrides {
                    weights,
                    ..with_market(&market)
                },
            )?;
            let out = commands::cmd_verify(&c)?;
            (c, out)
        }
    };
    outcome
        .report
        .emit(config.format, config.output.as_deref())?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
