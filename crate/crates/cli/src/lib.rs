//! Command-line front end: configuration handling, pipeline
//! orchestration and report emission. All estimation lives in the
//! library crate; this crate wires stages together, applies flag
//! precedence (flags beat the configuration file) and attributes
//! failures to their pipeline stage.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod stage;
pub mod statement;

use clap::{Parser, Subcommand};

use crate::config::{CommonArgs, StatementArgs, SynthArgs};
use crate::stage::StageError;

#[derive(Parser, Debug)]
#[command(
    name = "citegap",
    version,
    about = "Audits gendered citation imbalance in a bibliographic corpus"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and normalize a corpus, reporting rejected rows.
    Ingest(CommonArgs),
    /// Resolve author name variants into identities.
    Disambiguate(CommonArgs),
    /// Assign author genders and per-paper team categories.
    Gender(CommonArgs),
    /// Fit the citation-expectation model and save it as JSON.
    Fit(CommonArgs),
    /// Run the full estimation pipeline and write every report.
    Analyze(CommonArgs),
    /// Build the co-authorship network and per-paper composition.
    Network(CommonArgs),
    /// Fit the network-adjusted overcitation regression.
    Regress(CommonArgs),
    /// Generate a synthetic corpus with known ground truth.
    Synth(SynthArgs),
    /// Summarize a reference list's gender-category makeup.
    DiversityStatement(StatementArgs),
}

/// Dispatches one parsed invocation. Errors carry the failing stage.
pub fn run(cli: Cli) -> Result<(), StageError> {
    match cli.command {
        Command::Ingest(args) => commands::ingest(&config::resolve(&args)?),
        Command::Disambiguate(args) => commands::disambiguate(&config::resolve(&args)?),
        Command::Gender(args) => commands::gender(&config::resolve(&args)?),
        Command::Fit(args) => commands::fit(&config::resolve(&args)?),
        Command::Analyze(args) => commands::analyze(&config::resolve(&args)?),
        Command::Network(args) => commands::network(&config::resolve(&args)?),
        Command::Regress(args) => commands::regress(&config::resolve(&args)?),
        Command::Synth(args) => commands::synth(&args),
        Command::DiversityStatement(args) => {
            commands::diversity_statement(&config::resolve(&args.common)?, &args)
        }
    }
}
