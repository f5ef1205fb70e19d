// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::Serialize;
use zipcol::format::meta::{ColumnStorage, LeafColumn, PageLayout};
use zipcol::format::{FileReader, PageSummary};
use zipcol::io::{CoalescePolicy, FileStorage, IoEngine, ReadTag};
use zipcol::miniblock::{decode_chunk_body, decode_chunk_meta};

use crate::commands::file_label;
use crate::record::Format;

#[derive(Debug, Serialize)]
struct PageJson {
    leaf: usize,
    encoding: String,
    row_start: u64,
    rows: u64,
    chunks: usize,
    data_bytes: u64,
    index_bytes: u64,
    cache_bytes: u64,
    chunk_histogram: BTreeMap<u64, u64>,
}

#[derive(Debug, Serialize)]
struct ColumnJson {
    name: String,
    data_type: String,
    storage: &'static str,
    data_bytes: u64,
    pages: Vec<PageJson>,
}

#[derive(Debug, Serialize)]
struct FileJson {
    file_bytes: u64,
    version: String,
    rows: u64,
    encoding: &'static str,
    metadata_offset: u64,
    metadata_bytes: u64,
    data_bytes: u64,
    cache_bytes: u64,
    columns: Vec<ColumnJson>,
}

fn page_json(p: &PageSummary) -> PageJson {
    PageJson {
        leaf: p.leaf,
        encoding: p.encoding.to_string(),
        row_start: p.row_start,
        rows: p.rows,
        chunks: p.chunks,
        data_bytes: p.data_bytes,
        index_bytes: p.index_bytes,
        cache_bytes: p.cache_bytes,
        chunk_histogram: p.chunk_histogram.clone(),
    }
}

fn describe(reader: &FileReader) -> anyhow::Result<FileJson> {
    let footer = reader.footer();
    let summary = reader.summary()?;
    let columns: Vec<ColumnJson> = summary
        .iter()
        .zip(reader.columns())
        .map(|(s, c)| ColumnJson {
            name: s.name.clone(),
            data_type: c.field.data_type.to_string(),
            storage: s.storage,
            data_bytes: s.data_bytes,
            pages: s.pages.iter().map(page_json).collect(),
        })
        .collect();
    Ok(FileJson {
        file_bytes: reader.io().len(),
        version: format!("{}.{}", footer.version.0, footer.version.1),
        rows: footer.row_count,
        encoding: file_label(reader),
        metadata_offset: footer.meta_offset,
        metadata_bytes: footer.meta_len,
        data_bytes: columns.iter().map(|c| c.data_bytes).sum(),
        cache_bytes: reader.cache_bytes(),
        columns,
    })
}

/// Buffer sizes of the first `limit` chunks of a miniblock page.
fn chunk_buffers(reader: &FileReader, layout: &PageLayout, limit: usize) -> anyhow::Result<Vec<Vec<usize>>> {
    let PageLayout::MiniBlock { chunk_count, cache, data, .. } = layout else {
        return Ok(Vec::new());
    };
    let words = reader.io().read(cache.offset..cache.offset + 2 * *chunk_count as u64, ReadTag::SearchCache)?;
    let mut offset = data.offset;
    let mut out = Vec::new();
    for w in words.chunks_exact(2).take(limit) {
        let (_, body_bytes) = decode_chunk_meta(u16::from_le_bytes([w[0], w[1]]));
        let body = reader.io().read(offset..offset + body_bytes as u64, ReadTag::Data)?;
        out.push(decode_chunk_body(&body, offset)?.iter().map(|b| b.len()).collect());
        offset += body_bytes as u64;
    }
    Ok(out)
}

fn percent(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

fn write_text(reader: &FileReader, file: &FileJson, chunks: usize, mut out: impl Write) -> anyhow::Result<()> {
    writeln!(out, "file: {} bytes, format {}, {} rows, {} columns", file.file_bytes, file.version, file.rows, file.columns.len())?;
    writeln!(out, "metadata: {} bytes at offset {}", file.metadata_bytes, file.metadata_offset)?;
    for (i, c) in file.columns.iter().enumerate() {
        writeln!(out, "column {i} '{}': {} ({}), {} bytes", c.name, c.data_type, c.storage, c.data_bytes)?;
        let leaves: Vec<&LeafColumn> = match &reader.columns()[i].storage {
            ColumnStorage::Shredded(leaves) => leaves.iter().collect(),
            ColumnStorage::Packed { leaf, .. } => vec![leaf],
            ColumnStorage::Arrow(_) => Vec::new(),
        };
        let layouts = leaves.iter().flat_map(|l| &l.pages).map(|p| &p.layout);
        for (p, layout) in c.pages.iter().zip(layouts) {
            let end = p.row_start + p.rows;
            write!(out, "  leaf {} rows [{}, {end}): {}, {} bytes", p.leaf, p.row_start, p.encoding, p.data_bytes)?;
            if p.encoding == "miniblock" {
                write!(out, ", {} chunks, search cache {} bytes on disk", p.chunks, p.index_bytes)?;
            } else if p.index_bytes > 0 {
                write!(out, ", repetition index {} bytes", p.index_bytes)?;
            }
            writeln!(out, ", {} bytes in memory", p.cache_bytes)?;
            if !p.chunk_histogram.is_empty() {
                let parts: Vec<String> = p.chunk_histogram.iter().rev().map(|(v, n)| format!("{v} x{n}")).collect();
                writeln!(out, "    values per chunk: {}", parts.join(", "))?;
            }
            for (n, sizes) in chunk_buffers(reader, layout, chunks)?.iter().enumerate() {
                let list: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
                writeln!(out, "    chunk {n}: {} buffers of {} bytes", sizes.len(), list.join("/"))?;
            }
        }
    }
    writeln!(
        out,
        "total: {} data bytes, {} cache bytes ({:.4}% of data)",
        file.data_bytes,
        file.cache_bytes,
        percent(file.cache_bytes, file.data_bytes)
    )?;
    Ok(())
}

pub fn inspect(path: &Path, chunks: usize, format: Option<Format>, out: impl Write) -> anyhow::Result<()> {
    let storage = FileStorage::open(path, false).with_context(|| format!("opening {}", path.display()))?;
    let reader = FileReader::open(IoEngine::new(Arc::new(storage), CoalescePolicy::disabled()))
        .with_context(|| format!("reading {}", path.display()))?;
    let file = describe(&reader)?;
    match format {
        None => write_text(&reader, &file, chunks, out),
        Some(Format::Json) => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &file)?;
            writeln!(out)?;
            Ok(())
        }
        Some(Format::Csv) => bail!("inspect prints text or json"),
    }
}
