mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use primeball::scenario::ClockMode;
use primeball::ConsistencyMode;

use crate::config::RunConfig;
use crate::error::Failure;

/// Generates news-hub corpora, runs the benchmark scenarios against the
/// reference store and turns their reports into property tables.
#[derive(Debug, Parser)]
#[command(name = "primeball", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a corpus directory.
    Generate(GenerateArgs),
    /// Load the initial data into a new store and build its metadata, timed as a scenario 6 report.
    Init(InitArgs),
    /// Rebuild the metadata of a saved store.
    Index(IndexArgs),
    /// Run one query against a saved store.
    Query(QueryArgs),
    /// Run one scenario, or all of them.
    Run(RunArgs),
    /// Compute metrics and the property table from scenario reports.
    Report(ReportArgs),
    /// Audit reports and re-check corpus and store directories.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Consistency {
    Strong,
    Eventual,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Clock {
    Virtual,
    Realtime,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ResultFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Json,
    Csv,
    Markdown,
}

/// Settings shared by the commands that build a store; flags win over the config file.
#[derive(Debug, Args)]
struct RunSettings {
    /// Run-config TOML file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for data generation and workloads.
    #[arg(long)]
    seed: Option<u64>,
    /// Initial data size in GB.
    #[arg(long)]
    sf: Option<f64>,
    #[arg(long)]
    nodes: Option<u32>,
    #[arg(long)]
    replication: Option<u32>,
    #[arg(long, value_enum)]
    consistency: Option<Consistency>,
    #[arg(long, value_enum)]
    clock: Option<Clock>,
    /// Corpus directory from `generate`; without it the corpus is generated in memory.
    #[arg(long, value_name = "DIR")]
    corpus: Option<PathBuf>,
}

impl RunSettings {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut c = RunConfig::load(self.config.as_deref())?;
        let s = &mut c.scenario;
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.sf {
            s.sf = v;
            c.sf_explicit = true;
        }
        if let Some(v) = self.nodes {
            s.nodes = v;
        }
        if let Some(v) = self.replication {
            s.replication = v;
        }
        if let Some(v) = self.consistency {
            s.consistency = match v {
                Consistency::Strong => ConsistencyMode::Strong,
                Consistency::Eventual => ConsistencyMode::Eventual,
            };
        }
        if let Some(v) = self.clock {
            s.clock = match v {
                Clock::Virtual => ClockMode::Virtual,
                Clock::Realtime => ClockMode::Realtime,
            };
        }
        if let Some(p) = &self.corpus {
            c.paths.corpus = Some(p.clone());
        }
        c.check()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Corpus size in GB; without it, `sf` times `corpus_factor` from the config.
    #[arg(long)]
    sf: Option<f64>,
    /// Output directory; must be absent or empty.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Run-config TOML file; its seed, sf, corpus_factor and [generator] table are used.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InitArgs {
    #[command(flatten)]
    settings: RunSettings,
    /// Store directory to create; must be absent or empty.
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// Where to write the scenario 6 report.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IndexArgs {
    #[arg(long, value_name = "DIR")]
    data_dir: PathBuf,
    /// Run-config TOML file; its [pipeline] table is used.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed of the topic model sampler.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long, value_name = "DIR")]
    data_dir: PathBuf,
    /// Query kind, Q1 to Q14 or A1 to A4.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: ResultFormat,
    /// Draw the parameters not given below from the store with this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Current date for the look-back queries (YYYY-MM-DD).
    #[arg(long, value_name = "DATE")]
    today: Option<chrono::NaiveDate>,
    /// Write the result here instead of standard output.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args)]
struct ParamArgs {
    #[arg(long, value_name = "DATE")]
    date: Option<chrono::NaiveDate>,
    #[arg(long, value_name = "DATE")]
    from: Option<chrono::NaiveDate>,
    #[arg(long, value_name = "DATE")]
    to: Option<chrono::NaiveDate>,
    #[arg(long, value_name = "ID")]
    journalist: Option<u32>,
    #[arg(long, value_name = "ID")]
    author: Option<u32>,
    #[arg(long, value_name = "ID")]
    topic: Option<u32>,
    #[arg(long, value_name = "ID")]
    country: Option<u32>,
    #[arg(long)]
    month: Option<u32>,
    #[arg(long)]
    year: Option<i32>,
    #[arg(long)]
    year1: Option<i32>,
    #[arg(long)]
    year2: Option<i32>,
    #[arg(long)]
    day_of_year: Option<u32>,
    #[arg(long)]
    days: Option<u32>,
    #[arg(long)]
    min_journalists: Option<u32>,
    #[arg(long)]
    min_topics: Option<u32>,
    #[arg(long)]
    term: Option<String>,
    /// Article id for the similarity query.
    #[arg(long, value_name = "ID")]
    document: Option<u64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario number 1 to 7, or `all`.
    #[arg(long)]
    scenario: String,
    #[command(flatten)]
    settings: RunSettings,
    /// Report file; a directory when running all scenarios.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report files or directories of them.
    #[arg(long = "in", value_name = "PATH", required = true)]
    inputs: Vec<PathBuf>,
    /// Pricing TOML file.
    #[arg(long, value_name = "FILE")]
    pricing: Option<PathBuf>,
    /// Run-config TOML file; its [paths] pricing entry is used.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    format: TableFormat,
    /// Write the table here instead of standard output.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Report files or directories of them to audit.
    #[arg(long = "in", value_name = "PATH")]
    inputs: Vec<PathBuf>,
    /// Corpus directory to check against its manifest.
    #[arg(long, value_name = "DIR")]
    corpus: Option<PathBuf>,
    /// Store directory to reopen.
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Init(a) => commands::init(a),
        Command::Index(a) => commands::index(a),
        Command::Query(a) => commands::query(a),
        Command::Run(a) => commands::run(a),
        Command::Report(a) => commands::report(a),
        Command::Verify(a) => commands::verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid usage").trim_start_matches("error: ");
            let f = Failure::usage(first);
            eprintln!("{f}");
            return ExitCode::from(f.class.exit_code());
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.class.exit_code())
        }
    }
}
