// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Output records. CSV columns follow field order.

use std::io::Write;

use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One take or scan workload. IOP and byte counts come from the IO engine's
/// counters only.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub scenario: String,
    /// `fullzip`, `miniblock`, `arrow-baseline`, or `auto` for mixed pages.
    pub encoding: &'static str,
    /// `take` or `scan`.
    pub workload: &'static str,
    pub rows: u64,
    pub k: u64,
    pub batches: u64,
    pub workers: u64,
    pub coalesce: bool,
    pub iops: u64,
    pub planned_iops: u64,
    pub bytes_read: u64,
    pub useful_bytes: u64,
    pub read_amplification: f64,
    pub sectors_touched: u64,
    pub coalesced_merges: u64,
    pub largest_read: u64,
    pub rows_per_second: f64,
    pub elapsed_seconds: f64,
    pub cache_bytes: u64,
}

/// Result of `generate`.
#[derive(Debug, Clone, Serialize)]
pub struct GenerateRecord {
    pub scenario: String,
    pub encoding: &'static str,
    pub rows: u64,
    pub seed: u64,
    pub file_bytes: u64,
    pub data_bytes: u64,
    pub metadata_bytes: u64,
    pub cache_bytes: u64,
    pub pages: u64,
    pub fullzip_pages: u64,
    pub miniblock_pages: u64,
    pub chunks: u64,
}

/// One point of the coalescing model.
#[derive(Debug, Clone, Serialize)]
pub struct CoalesceRecord {
    pub rows: u64,
    pub value_bytes: u64,
    pub page_bytes: u64,
    pub k: u64,
    pub pages: u64,
    pub expected_distinct_pages: f64,
    /// Fraction of sampled rows that share a page with another sample.
    pub overlap: f64,
}

/// Writes `records` as CSV with a header row, or as a JSON array.
pub fn emit<T: Serialize>(records: &[T], format: Format, out: impl Write) -> anyhow::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, records)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
