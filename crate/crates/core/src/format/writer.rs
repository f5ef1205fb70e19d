// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use std::collections::HashSet;
use std::ops::Range;

use super::meta::{
    write_metadata, ColumnMeta, ColumnStorage, Footer, LeafColumn, PageLayout, PageMeta, MAGIC, VERSION_MAJOR,
    VERSION_MINOR,
};
use super::packed::pack_struct;
use super::{leaf_struct_paths, project_path, select_encoding, EncodingChoice, StructuralEncoding, WriteOptions};
use crate::array::{Field, LogicalArray};
use crate::arrow::{write_arrow_layout, Extent};
use crate::codecs::{Codec, CodecRequest};
use crate::fullzip::{encode_full_zip, FullZipPage};
use crate::miniblock::{encode_miniblock, ChunkCache, MiniBlockPage};
use crate::repdef::{shred, RepDefLevels};
use crate::{Error, Result};

/// What the writer did with one page.
#[derive(Debug, Clone, PartialEq)]
pub struct PageReport {
    pub leaf: usize,
    pub encoding: StructuralEncoding,
    pub row_start: u64,
    pub rows: u64,
    /// Average value width that drove routing, bytes per row.
    pub avg_width: f64,
    pub chunks: usize,
    /// Bytes of page buffers in the file.
    pub data_bytes: u64,
    /// Bytes the reader keeps in memory for this page.
    pub cache_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnReport {
    pub name: String,
    /// `shredded`, `packed` or `arrow`.
    pub storage: &'static str,
    pub pages: Vec<PageReport>,
    /// Bytes of column data in the file (pages or arrow buffers).
    pub data_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WriteReport {
    pub columns: Vec<ColumnReport>,
    pub file_bytes: u64,
    pub metadata_bytes: u64,
    pub rows: u64,
}

impl WriteReport {
    pub fn cache_bytes(&self) -> u64 {
        self.columns.iter().flat_map(|c| &c.pages).map(|p| p.cache_bytes).sum()
    }

    pub fn data_bytes(&self) -> u64 {
        self.columns.iter().map(|c| c.data_bytes).sum()
    }

    pub fn page_count(&self) -> usize {
        self.columns.iter().map(|c| c.pages.len()).sum()
    }
}

enum EncodedPage {
    FullZip(FullZipPage),
    MiniBlock(MiniBlockPage),
}

impl EncodedPage {
    fn size(&self) -> u64 {
        match self {
            EncodedPage::FullZip(p) => (p.rep_index.len() + p.zipped.len()) as u64,
            EncodedPage::MiniBlock(p) => (p.chunk_words.len() * 2 + p.rep_index.len() * 4 + p.data.len()) as u64,
        }
    }
}

struct Planned {
    rows: Range<u64>,
    avg_width: f64,
    page: EncodedPage,
}

fn pad(out: &mut Vec<u8>) {
    out.resize(out.len().next_multiple_of(8), 0);
}

fn append(out: &mut Vec<u8>, bytes: &[u8]) -> Extent {
    pad(out);
    let offset = out.len() as u64;
    out.extend_from_slice(bytes);
    Extent { offset, length: bytes.len() as u64 }
}

fn dictionary_bytes(codec: &Codec) -> u64 {
    codec.dictionary.as_ref().map_or(0, |d| d.data_len() as u64 + 8 * d.len() as u64)
}

struct LeafWriter<'a> {
    options: &'a WriteOptions,
    encoding: EncodingChoice,
    codec: CodecRequest,
    levels: &'a RepDefLevels,
    /// Array whose payload is exactly this leaf, for width accounting.
    source: &'a LogicalArray,
    starts: Vec<usize>,
}

impl LeafWriter<'_> {
    fn entries(&self, rows: &Range<u64>) -> Range<usize> {
        let at = |r: u64| self.starts.get(r as usize).copied().unwrap_or(self.levels.len());
        at(rows.start)..at(rows.end)
    }

    fn encode(&self, rows: Range<u64>, out: &mut Vec<Planned>) -> Result<()> {
        let levels = self.levels.slice_entries(self.entries(&rows));
        let width = self.source.slice(rows.start as usize, (rows.end - rows.start) as usize)?.avg_value_width()?;
        let encoding = match self.encoding {
            EncodingChoice::FullZip => StructuralEncoding::FullZip,
            EncodingChoice::MiniBlock => StructuralEncoding::MiniBlock,
            _ => select_encoding(&width),
        };
        let codec = Codec::resolve(self.codec, &levels.values)?;
        let page = match encoding {
            StructuralEncoding::FullZip => EncodedPage::FullZip(encode_full_zip(&levels, &codec)?),
            StructuralEncoding::MiniBlock => {
                EncodedPage::MiniBlock(encode_miniblock(&levels, &codec, self.options.chunk_budget)?)
            }
        };
        let n = rows.end - rows.start;
        if page.size() > self.options.page_bytes && n > 1 {
            let mid = rows.start + n / 2;
            self.encode(rows.start..mid, out)?;
            return self.encode(mid..rows.end, out);
        }
        out.push(Planned { rows, avg_width: width.bytes_per_row(), page });
        Ok(())
    }

    fn plan(&self) -> Result<Vec<Planned>> {
        let rows = self.source.len() as u64;
        let mut out = Vec::new();
        if rows == 0 {
            return Ok(out);
        }
        let per_row = self.source.avg_value_width()?.bytes_per_row().max(1.0);
        let per_page = ((self.options.page_bytes as f64 / per_row) as u64).clamp(1, rows);
        let mut start = 0;
        while start < rows {
            let end = (start + per_page).min(rows);
            self.encode(start..end, &mut out)?;
            start = end;
        }
        Ok(out)
    }
}

fn write_pages(
    leaf: usize,
    planned: Vec<Planned>,
    file: &mut Vec<u8>,
    reports: &mut Vec<PageReport>,
) -> Result<LeafColumn> {
    let mut column = LeafColumn::default();
    for p in planned {
        let row_count = p.rows.end - p.rows.start;
        let start = file.len();
        let (layout, chunks, cache_bytes) = match p.page {
            EncodedPage::FullZip(page) => {
                let rep_index = append(file, &page.rep_index);
                let data = append(file, &page.zipped);
                let cache = dictionary_bytes(&page.layout.codec);
                (PageLayout::FullZip { layout: page.layout, rep_index, data }, 0, cache)
            }
            EncodedPage::MiniBlock(page) => {
                let mut cache_buf = Vec::with_capacity(page.chunk_words.len() * 2 + page.rep_index.len() * 4);
                for w in &page.chunk_words {
                    cache_buf.extend_from_slice(&w.to_le_bytes());
                }
                for r in &page.rep_index {
                    cache_buf.extend_from_slice(&r.rows_completed.to_le_bytes());
                    cache_buf.extend_from_slice(&r.trailing.to_le_bytes());
                }
                let cache = append(file, &cache_buf);
                let data = append(file, &page.data);
                let memory = ChunkCache::from_page(&page)?.heap_bytes() as u64 + dictionary_bytes(&page.layout.codec);
                let chunk_count = page.chunk_count();
                let layout = PageLayout::MiniBlock {
                    layout: page.layout,
                    chunk_count: u32::try_from(chunk_count).map_err(|_| Error::invalid("too many chunks in page"))?,
                    cache,
                    data,
                };
                (layout, chunk_count, memory)
            }
        };
        reports.push(PageReport {
            leaf,
            encoding: match layout {
                PageLayout::FullZip { .. } => StructuralEncoding::FullZip,
                PageLayout::MiniBlock { .. } => StructuralEncoding::MiniBlock,
            },
            row_start: p.rows.start,
            rows: row_count,
            avg_width: p.avg_width,
            chunks,
            data_bytes: (file.len() - start) as u64,
            cache_bytes,
        });
        column.pages.push(PageMeta { row_start: p.rows.start, row_count, layout });
    }
    Ok(column)
}

fn check_columns(columns: &[(Field, LogicalArray)]) -> Result<u64> {
    let mut names = HashSet::new();
    let mut rows = None;
    for (field, array) in columns {
        if !names.insert(field.name.as_str()) {
            return Err(Error::invalid(format!("duplicate column name '{}'", field.name)));
        }
        field.data_type.check().map_err(Error::InvalidArgument)?;
        array
            .validate_field(field)
            .map_err(|v| Error::InvalidArray(format!("column {}: {v}", field.name)))?;
        match rows {
            None => rows = Some(array.len()),
            Some(n) if n != array.len() => {
                return Err(Error::invalid(format!(
                    "column {} has {} rows, expected {n}",
                    field.name,
                    array.len()
                )))
            }
            _ => {}
        }
    }
    Ok(rows.unwrap_or(0) as u64)
}

/// Writes `columns` (all of the same length) into a complete file.
///
/// Output is a pure function of the inputs and options.
pub fn write_file(columns: &[(Field, LogicalArray)], options: &WriteOptions) -> Result<(Vec<u8>, WriteReport)> {
    if options.page_bytes == 0 {
        return Err(Error::invalid("page size must be positive"));
    }
    let rows = check_columns(columns)?;
    let mut file = Vec::new();
    file.extend_from_slice(MAGIC);
    file.extend_from_slice(&[0; 4]);

    let mut metas = Vec::with_capacity(columns.len());
    let mut report = WriteReport { rows, ..Default::default() };
    for (field, array) in columns {
        let opts = options.column(&field.name);
        let start = file.len();
        let mut pages = Vec::new();
        let (storage, kind) = if opts.encoding == EncodingChoice::Arrow {
            pad(&mut file);
            let (bytes, layout) = write_arrow_layout(field, array, file.len() as u64)?;
            file.extend_from_slice(&bytes);
            (ColumnStorage::Arrow(layout), "arrow")
        } else if opts.pack_struct {
            let (layout, levels) = pack_struct(field, array, opts.codec)?;
            let writer = LeafWriter {
                options,
                encoding: opts.encoding,
                codec: CodecRequest::Passthrough,
                levels: &levels,
                source: array,
                starts: levels.row_starts(),
            };
            let leaf = write_pages(0, writer.plan()?, &mut file, &mut pages)?;
            (ColumnStorage::Packed { layout, leaf }, "packed")
        } else {
            let leaves = shred(field, array)?;
            let paths = leaf_struct_paths(&field.data_type);
            let mut out = Vec::with_capacity(leaves.len());
            for (i, (levels, path)) in leaves.iter().zip(&paths).enumerate() {
                let source = project_path(array, path);
                let writer = LeafWriter {
                    options,
                    encoding: opts.encoding,
                    codec: opts.codec,
                    levels,
                    source: &source,
                    starts: levels.row_starts(),
                };
                out.push(write_pages(i, writer.plan()?, &mut file, &mut pages)?);
            }
            (ColumnStorage::Shredded(out), "shredded")
        };
        report.columns.push(ColumnReport {
            name: field.name.clone(),
            storage: kind,
            pages,
            data_bytes: (file.len() - start) as u64,
        });
        metas.push(ColumnMeta { field: field.clone(), storage });
    }

    let meta = write_metadata(&metas);
    let extent = append(&mut file, &meta);
    let footer = Footer {
        meta_offset: extent.offset,
        meta_len: extent.length,
        column_count: columns.len() as u32,
        row_count: rows,
        version: (VERSION_MAJOR, VERSION_MINOR),
    };
    file.extend_from_slice(&footer.to_bytes());
    report.file_bytes = file.len() as u64;
    report.metadata_bytes = extent.length;
    Ok((file, report))
}
