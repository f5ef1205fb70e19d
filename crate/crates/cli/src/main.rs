// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! `zipcol`: generate datasets, run take and scan workloads, model request
//! coalescing and inspect files.
//!
//! Exit status is 0 on success, 2 when a workload assertion fails and 1 on
//! any other error.

mod commands;
mod inspect;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zipcol::datagen::Scenario;
use zipcol::format::{EncodingChoice, DEFAULT_PAGE_BYTES};

use crate::record::Format;

#[derive(Debug, Parser)]
#[command(name = "zipcol", version, about = "Columnar format benchmark tool")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a scenario dataset to a file.
    Generate {
        /// Output file.
        path: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        out: Format,
    },
    /// Run batches of random takes and report IOPS.
    Take {
        #[command(flatten)]
        source: SourceArgs,
        /// Rows per take.
        #[arg(long, default_value_t = 256)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        batches: usize,
        /// Threads issuing takes; defaults to the number of logical cores.
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        out: Format,
    },
    /// Read every column sequentially.
    Scan {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        out: Format,
    },
    /// Expected distinct pages touched by k random rows, by dataset size.
    CoalesceModel {
        /// Sampled rows.
        #[arg(long, default_value_t = 100_000)]
        k: u64,
        /// Comma-separated row counts; defaults to powers of ten from 10^3
        /// to 10^10 plus 4x10^9.
        #[arg(long, value_delimiter = ',')]
        rows: Vec<u64>,
        /// Comma-separated value sizes in bytes.
        #[arg(long, value_delimiter = ',', default_values_t = [4, 16, 3072])]
        value_bytes: Vec<u64>,
        #[arg(long, default_value_t = 8192)]
        page_bytes: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        out: Format,
    },
    /// Describe a file: footer, columns, pages, chunks and cache size.
    Inspect {
        path: PathBuf,
        /// Print buffer sizes of the first N chunks of each miniblock page.
        #[arg(long, default_value_t = 0)]
        chunks: usize,
        /// Text by default; `json` emits the structured summary.
        #[arg(long, value_enum)]
        out: Option<Format>,
    },
}

/// How to synthesize a scenario dataset.
#[derive(Debug, Clone, Args)]
struct DataArgs {
    #[arg(long)]
    scenario: Scenario,
    /// Defaults to the scenario's desk-scale row count.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long, default_value_t = EncodingChoice::Auto)]
    encoding: EncodingChoice,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of null rows.
    #[arg(long, default_value_t = 0.1)]
    null_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_PAGE_BYTES)]
    page_bytes: u64,
}

/// A file to read, or a scenario generated in memory.
#[derive(Debug, Clone, Args)]
struct SourceArgs {
    /// File to read; without it `--scenario` is generated in memory.
    #[arg(required_unless_present = "scenario")]
    path: Option<PathBuf>,
    #[arg(long, conflicts_with = "path")]
    scenario: Option<Scenario>,
    #[arg(long, requires = "scenario")]
    rows: Option<usize>,
    /// Encoding to generate with; for a file, the encoding it must use.
    #[arg(long)]
    encoding: Option<EncodingChoice>,
    /// Seeds data generation and row selection.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1, requires = "scenario")]
    null_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_PAGE_BYTES, requires = "scenario")]
    page_bytes: u64,
    /// Read only this column (or `column.child`); defaults to all columns.
    #[arg(long)]
    column: Option<String>,
    /// Ask the OS to drop cached file pages after each read.
    #[arg(long)]
    bypass_cache: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Args)]
struct IoArgs {
    /// Merge nearby reads into one IOP.
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    coalesce: OnOff,
    /// Largest gap in bytes bridged when merging.
    #[arg(long, default_value_t = 4096)]
    max_gap: u64,
}

/// A workload check that did not hold.
#[derive(Debug)]
struct AssertionFailed(String);

impl std::fmt::Display for AssertionFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "assertion failed: {}", self.0)
    }
}

impl std::error::Error for AssertionFailed {}

fn run(cli: Cli) -> anyhow::Result<()> {
    let stdout = std::io::stdout().lock();
    match cli.command {
        Command::Generate { path, data, out } => commands::generate(&path, &data, out, stdout),
        Command::Take { source, k, batches, workers, io, out } => {
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            commands::take(&source, &io, k, batches, workers, out, stdout)
        }
        Command::Scan { source, io, out } => commands::scan(&source, &io, out, stdout),
        Command::CoalesceModel { k, rows, value_bytes, page_bytes, out } => {
            commands::coalesce_model(k, &rows, &value_bytes, page_bytes, out, stdout)
        }
        Command::Inspect { path, chunks, out } => inspect::inspect(&path, chunks, out, stdout),
    }
}

fn main() -> ExitCode {
    // usage errors exit with 1; clap's own default of 2 is reserved for assertions
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<AssertionFailed>() => {
            eprintln!("zipcol: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("zipcol: {e:#}");
            ExitCode::from(1)
        }
    }
}
