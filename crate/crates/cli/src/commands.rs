// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use rand::Rng;
use zipcol::arrow::planned_take_iops;
use zipcol::datagen::{rng, Scenario};
use zipcol::format::meta::{ColumnStorage, LeafColumn, PageLayout};
use zipcol::format::{write_file, ColumnOptions, EncodingChoice, FileReader, WriteOptions, WriteReport};
use zipcol::io::model::page_count;
use zipcol::io::{expected_distinct_pages, CoalescePolicy, FileStorage, IoEngine, IoStats};

use crate::record::{emit, CoalesceRecord, Format, GenerateRecord, RunRecord};
use crate::{AssertionFailed, DataArgs, IoArgs, OnOff, SourceArgs};

/// Assertion failures listed before the rest are summarized.
const MAX_REPORTED_FAILURES: usize = 5;

fn write_scenario(
    scenario: Scenario,
    rows: usize,
    encoding: EncodingChoice,
    seed: u64,
    null_fraction: f64,
    page_bytes: u64,
) -> anyhow::Result<(Vec<u8>, WriteReport)> {
    if !(0.0..=1.0).contains(&null_fraction) {
        bail!("null fraction {null_fraction} is not in [0, 1]");
    }
    let array = scenario.generate(rows, null_fraction, seed);
    let options = WriteOptions { page_bytes, ..Default::default() }
        .with_default(ColumnOptions { encoding, ..Default::default() });
    Ok(write_file(&[(scenario.field(), array)], &options)?)
}

/// Encoding label of a file: `arrow-baseline`, `fullzip`, `miniblock`, or
/// `auto` when layouts are mixed.
pub fn file_label(reader: &FileReader) -> &'static str {
    let (mut arrow, mut full_zip, mut miniblock) = (false, false, false);
    for column in reader.columns() {
        let leaves: Vec<&LeafColumn> = match &column.storage {
            ColumnStorage::Arrow(_) => {
                arrow = true;
                continue;
            }
            ColumnStorage::Shredded(leaves) => leaves.iter().collect(),
            ColumnStorage::Packed { leaf, .. } => vec![leaf],
        };
        for page in leaves.iter().flat_map(|l| &l.pages) {
            match page.layout {
                PageLayout::FullZip { .. } => full_zip = true,
                PageLayout::MiniBlock { .. } => miniblock = true,
            }
        }
    }
    match (arrow, full_zip, miniblock) {
        (true, false, false) => "arrow-baseline",
        (false, true, false) => "fullzip",
        (false, false, true) => "miniblock",
        _ => "auto",
    }
}

fn choice_label(choice: EncodingChoice) -> &'static str {
    match choice {
        EncodingChoice::Auto => "auto",
        EncodingChoice::FullZip => "fullzip",
        EncodingChoice::MiniBlock => "miniblock",
        EncodingChoice::Arrow => "arrow-baseline",
    }
}

pub fn generate(path: &Path, data: &DataArgs, out: Format, stdout: impl Write) -> anyhow::Result<()> {
    let rows = data.rows.unwrap_or_else(|| data.scenario.default_rows());
    let (bytes, report) =
        write_scenario(data.scenario, rows, data.encoding, data.seed, data.null_fraction, data.page_bytes)?;
    std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
    let reader = FileReader::open_metadata(IoEngine::in_memory(bytes, CoalescePolicy::disabled()))?;
    let pages: Vec<_> = report.columns.iter().flat_map(|c| &c.pages).collect();
    let count = |e| pages.iter().filter(|p| p.encoding == e).count() as u64;
    let record = GenerateRecord {
        scenario: data.scenario.name().to_string(),
        encoding: file_label(&reader),
        rows: report.rows,
        seed: data.seed,
        file_bytes: report.file_bytes,
        data_bytes: report.data_bytes(),
        metadata_bytes: report.metadata_bytes,
        cache_bytes: report.cache_bytes(),
        pages: pages.len() as u64,
        fullzip_pages: count(zipcol::format::StructuralEncoding::FullZip),
        miniblock_pages: count(zipcol::format::StructuralEncoding::MiniBlock),
        chunks: pages.iter().map(|p| p.chunks as u64).sum(),
    };
    emit(&[record], out, stdout)
}

struct Source {
    reader: FileReader,
    scenario: String,
    columns: Vec<String>,
}

fn policy(io: &IoArgs) -> CoalescePolicy {
    CoalescePolicy { enabled: io.coalesce == OnOff::On, max_gap: io.max_gap, ..CoalescePolicy::default() }
}

/// Opens the file or generates the scenario, loads the search caches and
/// resets the counters so workloads exclude the open.
fn open_source(src: &SourceArgs, policy: CoalescePolicy) -> anyhow::Result<Source> {
    let (reader, scenario) = match (&src.path, src.scenario) {
        (Some(path), _) => {
            let storage = FileStorage::open(path, src.bypass_cache).with_context(|| format!("opening {}", path.display()))?;
            let reader = FileReader::open(IoEngine::new(Arc::new(storage), policy))
                .with_context(|| format!("reading {}", path.display()))?;
            if let Some(expected) = src.encoding.filter(|e| *e != EncodingChoice::Auto) {
                let found = file_label(&reader);
                if found != choice_label(expected) {
                    return Err(AssertionFailed(format!("file uses {found}, expected {}", choice_label(expected))).into());
                }
            }
            let scenario = reader.columns().first().map(|c| c.field.name.clone()).unwrap_or_default();
            (reader, scenario)
        }
        (None, Some(scenario)) => {
            let rows = src.rows.unwrap_or_else(|| scenario.default_rows());
            let encoding = src.encoding.unwrap_or(EncodingChoice::Auto);
            let (bytes, _) = write_scenario(scenario, rows, encoding, src.seed, src.null_fraction, src.page_bytes)?;
            (FileReader::open(IoEngine::in_memory(bytes, policy))?, scenario.name().to_string())
        }
        (None, None) => bail!("either a file or --scenario is required"),
    };
    let columns = match &src.column {
        Some(c) => {
            reader.projection(c)?;
            vec![c.clone()]
        }
        None => reader.columns().iter().map(|c| c.field.name.clone()).collect(),
    };
    reader.io().reset_stats();
    Ok(Source { reader, scenario, columns })
}

/// Upper bound on take IOPS per distinct row, and whether it is exact.
fn take_bound(reader: &FileReader, columns: &[String]) -> anyhow::Result<(u64, bool)> {
    let (mut bound, mut exact) = (0, true);
    for name in columns {
        let p = reader.projection(name)?;
        let leaves: Vec<&LeafColumn> = match &reader.columns()[p.column].storage {
            ColumnStorage::Arrow(_) => {
                bound += planned_take_iops(&reader.columns()[p.column].field).0 as u64;
                continue;
            }
            ColumnStorage::Shredded(leaves) => leaves[p.leaves.clone()].iter().collect(),
            ColumnStorage::Packed { leaf, .. } => vec![leaf],
        };
        for leaf in leaves {
            let mut worst = 0;
            for page in &leaf.pages {
                let cost = match &page.layout {
                    PageLayout::FullZip { layout, .. } if layout.has_rep_index() => {
                        // null and empty rows skip the data read
                        exact = false;
                        2
                    }
                    PageLayout::FullZip { .. } => 1,
                    PageLayout::MiniBlock { .. } => {
                        // rows sharing a chunk share a read
                        exact = false;
                        1
                    }
                };
                worst = worst.max(cost);
            }
            bound += worst;
        }
    }
    Ok((bound, exact))
}

fn add_stats(a: IoStats, b: IoStats) -> IoStats {
    IoStats {
        iops: a.iops + b.iops,
        bytes_read: a.bytes_read + b.bytes_read,
        useful_bytes: a.useful_bytes + b.useful_bytes,
        requests: a.requests + b.requests,
        coalesced_merges: a.coalesced_merges + b.coalesced_merges,
        sectors_touched: a.sectors_touched + b.sectors_touched,
        largest_read: a.largest_read.max(b.largest_read),
    }
}

/// Row indices of one batch; depends only on the seed and batch number.
fn batch_rows(seed: u64, batch: usize, k: usize, rows: u64) -> Vec<u64> {
    let mut r = rng(seed ^ (batch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (0..k).map(|_| r.gen_range(0..rows)).collect()
}

#[derive(Default)]
struct WorkerResult {
    stats: IoStats,
    planned: u64,
    failures: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn run_takes(
    source: &Source,
    policy: CoalescePolicy,
    bound: (u64, bool),
    seed: u64,
    k: usize,
    batches: usize,
    workers: usize,
    worker: usize,
) -> anyhow::Result<WorkerResult> {
    let reader = source.reader.with_io(source.reader.io().fork(policy));
    let names: Vec<&str> = source.columns.iter().map(String::as_str).collect();
    let rows = reader.row_count();
    let mut out = WorkerResult::default();
    for batch in (worker..batches).step_by(workers) {
        let picks = batch_rows(seed, batch, k, rows);
        let before = reader.io().stats();
        let (arrays, stats) = reader.take_with_stats(&names, &picks)?;
        let delta = reader.io().stats().since(&before);
        if arrays.iter().any(|a| a.len() != k) {
            out.failures.push(format!("batch {batch}: take returned the wrong number of rows"));
        }
        let mut distinct = picks.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let limit = bound.0 * distinct.len() as u64;
        if delta.iops != stats.planned_iops {
            out.failures.push(format!("batch {batch}: planned {} IOPS, executed {}", stats.planned_iops, delta.iops));
        }
        if delta.iops > limit {
            out.failures.push(format!("batch {batch}: {} IOPS exceeds {limit} for {} rows", delta.iops, distinct.len()));
        }
        if bound.1 && !policy.enabled && delta.iops != limit {
            out.failures.push(format!("batch {batch}: {} IOPS, expected exactly {limit}", delta.iops));
        }
        out.planned += stats.planned_iops;
        out.stats = add_stats(out.stats, delta);
    }
    Ok(out)
}

fn fail_on(failures: Vec<String>) -> anyhow::Result<()> {
    if failures.is_empty() {
        return Ok(());
    }
    let mut msg = failures.iter().take(MAX_REPORTED_FAILURES).cloned().collect::<Vec<_>>().join("; ");
    if failures.len() > MAX_REPORTED_FAILURES {
        msg += &format!("; {} more", failures.len() - MAX_REPORTED_FAILURES);
    }
    Err(AssertionFailed(msg).into())
}

pub fn take(
    src: &SourceArgs,
    io: &IoArgs,
    k: usize,
    batches: usize,
    workers: usize,
    out: Format,
    stdout: impl Write,
) -> anyhow::Result<()> {
    if k == 0 || workers == 0 {
        bail!("--k and --workers must be positive");
    }
    let policy = policy(io);
    let source = open_source(src, policy)?;
    if source.reader.row_count() == 0 {
        bail!("cannot take from a file without rows");
    }
    let bound = take_bound(&source.reader, &source.columns)?;
    let workers = workers.min(batches.max(1));
    let start = Instant::now();
    let results: Vec<anyhow::Result<WorkerResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let source = &source;
                s.spawn(move || run_takes(source, policy, bound, src.seed, k, batches, workers, w))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("take worker panicked")).collect()
    });
    let elapsed = start.elapsed().as_secs_f64();
    let mut total = WorkerResult::default();
    for r in results {
        let r = r?;
        total.stats = add_stats(total.stats, r.stats);
        total.planned += r.planned;
        total.failures.extend(r.failures);
    }
    let requested = (k * batches) as f64;
    let record = RunRecord {
        scenario: source.scenario.clone(),
        encoding: file_label(&source.reader),
        workload: "take",
        rows: source.reader.row_count(),
        k: k as u64,
        batches: batches as u64,
        workers: workers as u64,
        coalesce: policy.enabled,
        iops: total.stats.iops,
        planned_iops: total.planned,
        bytes_read: total.stats.bytes_read,
        useful_bytes: total.stats.useful_bytes,
        read_amplification: total.stats.read_amplification(),
        sectors_touched: total.stats.sectors_touched,
        coalesced_merges: total.stats.coalesced_merges,
        largest_read: total.stats.largest_read,
        rows_per_second: if elapsed > 0.0 { requested / elapsed } else { 0.0 },
        elapsed_seconds: elapsed,
        cache_bytes: source.reader.cache_bytes(),
    };
    emit(&[record], out, stdout)?;
    fail_on(total.failures)
}

/// Bytes a scan of `columns` requests: full-zip data without the
/// repetition index, the cache-to-data span of miniblock pages, and every
/// buffer of an arrow column.
fn scan_bytes(reader: &FileReader, columns: &[String]) -> anyhow::Result<u64> {
    let mut total = 0;
    for name in columns {
        let p = reader.projection(name)?;
        let leaves: Vec<&LeafColumn> = match &reader.columns()[p.column].storage {
            ColumnStorage::Arrow(layout) => {
                total += layout.root.extents().iter().map(|e| e.length).sum::<u64>();
                continue;
            }
            ColumnStorage::Shredded(leaves) => leaves[p.leaves.clone()].iter().collect(),
            ColumnStorage::Packed { leaf, .. } => vec![leaf],
        };
        for page in leaves.iter().flat_map(|l| &l.pages) {
            total += match &page.layout {
                PageLayout::FullZip { data, .. } => data.length,
                PageLayout::MiniBlock { cache, data, .. } => data.offset + data.length - cache.offset,
            };
        }
    }
    Ok(total)
}

pub fn scan(src: &SourceArgs, io: &IoArgs, out: Format, stdout: impl Write) -> anyhow::Result<()> {
    let policy = policy(io);
    let source = open_source(src, policy)?;
    let reader = &source.reader;
    let names: Vec<&str> = source.columns.iter().map(String::as_str).collect();
    let expected = scan_bytes(reader, &source.columns)?;
    let start = Instant::now();
    let arrays = reader.scan(&names)?;
    let elapsed = start.elapsed().as_secs_f64();
    let stats = reader.io().stats();
    let mut failures = Vec::new();
    if stats.useful_bytes != expected {
        failures.push(format!("scan requested {} bytes, expected {expected}", stats.useful_bytes));
    }
    if arrays.iter().any(|a| a.len() as u64 != reader.row_count()) {
        failures.push("scan returned the wrong number of rows".to_string());
    }
    let rows = reader.row_count();
    let record = RunRecord {
        scenario: source.scenario.clone(),
        encoding: file_label(reader),
        workload: "scan",
        rows,
        k: 0,
        batches: 1,
        workers: 1,
        coalesce: policy.enabled,
        iops: stats.iops,
        planned_iops: stats.requests,
        bytes_read: stats.bytes_read,
        useful_bytes: stats.useful_bytes,
        read_amplification: stats.read_amplification(),
        sectors_touched: stats.sectors_touched,
        coalesced_merges: stats.coalesced_merges,
        largest_read: stats.largest_read,
        rows_per_second: if elapsed > 0.0 { rows as f64 / elapsed } else { 0.0 },
        elapsed_seconds: elapsed,
        cache_bytes: reader.cache_bytes(),
    };
    emit(&[record], out, stdout)?;
    fail_on(failures)
}

/// Row counts of the default model sweep.
fn default_rows() -> Vec<u64> {
    let mut rows: Vec<u64> = (3..=10).map(|e| 10u64.pow(e)).collect();
    rows.push(4_000_000_000);
    rows.sort_unstable();
    rows
}

pub fn coalesce_model(
    k: u64,
    rows: &[u64],
    value_bytes: &[u64],
    page_bytes: u64,
    out: Format,
    stdout: impl Write,
) -> anyhow::Result<()> {
    if k == 0 || page_bytes == 0 {
        bail!("--k and --page-bytes must be positive");
    }
    let rows = if rows.is_empty() { default_rows() } else { rows.to_vec() };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &bytes in value_bytes {
        for &n in &rows {
            if n == 0 || bytes == 0 {
                bail!("row counts and value sizes must be positive");
            }
            let sample = k.min(n);
            let pages = page_count(n, bytes, page_bytes);
            let expected = expected_distinct_pages(n, bytes, page_bytes, sample);
            if !(expected >= 1.0 - 1e-9 && expected <= sample.min(pages) as f64 + 1e-9) {
                failures.push(format!("{n} rows x {bytes} B: {expected} pages is outside [1, {}]", sample.min(pages)));
            }
            records.push(CoalesceRecord {
                rows: n,
                value_bytes: bytes,
                page_bytes,
                k: sample,
                pages,
                expected_distinct_pages: expected,
                overlap: 1.0 - expected / sample as f64,
            });
        }
    }
    emit(&records, out, stdout)?;
    fail_on(failures)
}
