// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use std::collections::BTreeMap;
use std::ops::Range;

use bytes::Bytes;

use super::meta::{read_metadata, ColumnMeta, ColumnStorage, Footer, LeafColumn, PageLayout, PageMeta, FOOTER_LEN};
use super::packed::unpack_struct;
use super::{struct_subset, StructuralEncoding};
use crate::array::{DataType, Field, LogicalArray};
use crate::arrow::{scan_arrow, take_arrow};
use crate::codecs::{Codec, LeafShape};
use crate::fullzip::{data_range_from_index, decode_full_zip_scan, decode_rows, locate_rows, RowLocation};
use crate::io::{IoEngine, ReadRequest, ReadTag};
use crate::miniblock::{decode_chunk, decode_miniblock_scan, select_rows, ChunkCache, ChunkRepIndex, MiniBlockPage};
use crate::repdef::{leaf_paths, unshred, RepDefLevels};
use crate::{Error, Result};

/// A column, or one child of a struct column, selected by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    pub column: usize,
    pub child: Option<usize>,
    /// Type of the arrays returned for this projection.
    pub field: Field,
    /// Leaf columns read, for shredded storage.
    pub leaves: Range<usize>,
}

/// Reads planned by a take, as counted before coalescing decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TakeStats {
    /// Reads the engine planned to issue.
    pub planned_iops: u64,
    /// Dependent rounds of reads.
    pub phases: usize,
}

impl TakeStats {
    fn add(&mut self, io: &IoEngine, requests: &[ReadRequest]) {
        let n = io.planned_iops(requests);
        if n > 0 {
            self.planned_iops += n;
        }
    }
}

/// One stored page, as recorded in the metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageSummary {
    pub leaf: usize,
    pub encoding: StructuralEncoding,
    pub row_start: u64,
    pub rows: u64,
    pub chunks: usize,
    /// Bytes the page occupies in the file, alignment padding included.
    pub data_bytes: u64,
    /// On-disk repetition index (full-zip) or search cache (miniblock).
    pub index_bytes: u64,
    /// Bytes held in memory for random access.
    pub cache_bytes: u64,
    /// Number of chunks keyed by values per chunk.
    pub chunk_histogram: BTreeMap<u64, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSummary {
    pub name: String,
    /// `shredded`, `packed` or `arrow`.
    pub storage: &'static str,
    pub pages: Vec<PageSummary>,
    /// Bytes the column occupies in the file, alignment padding included.
    pub data_bytes: u64,
}

/// Opened file: footer, metadata and (optionally) miniblock search caches.
#[derive(Debug, Clone)]
pub struct FileReader {
    io: IoEngine,
    footer: Footer,
    columns: Vec<ColumnMeta>,
    /// `[column][leaf][page]`; `None` for full-zip pages or before loading.
    caches: Vec<Vec<Vec<Option<ChunkCache>>>>,
    cache_loaded: bool,
}

fn leaves_of(storage: &ColumnStorage) -> Vec<&LeafColumn> {
    match storage {
        ColumnStorage::Shredded(leaves) => leaves.iter().collect(),
        ColumnStorage::Packed { leaf, .. } => vec![leaf],
        ColumnStorage::Arrow(_) => Vec::new(),
    }
}

fn parse_cache(bytes: &[u8], chunk_count: usize, has_rep: bool, base: u64) -> Result<(Vec<u16>, Vec<ChunkRepIndex>)> {
    let expected = chunk_count * 2 + if has_rep { chunk_count * 4 } else { 0 };
    if bytes.len() != expected {
        return Err(Error::corrupt(base, format!("search cache has {} bytes, expected {expected}", bytes.len())));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let words = (0..chunk_count).map(|i| u16_at(2 * i)).collect();
    let rep = if has_rep {
        let at = chunk_count * 2;
        (0..chunk_count)
            .map(|i| ChunkRepIndex { rows_completed: u16_at(at + 4 * i), trailing: u16_at(at + 4 * i + 2) })
            .collect()
    } else {
        Vec::new()
    };
    Ok((words, rep))
}

/// Empty levels of a leaf; `packed` carries the shape of a packed struct leaf.
fn empty_levels(field: &Field, leaf: usize, packed: Option<LeafShape>) -> RepDefLevels {
    match packed {
        Some(shape) => RepDefLevels {
            rep: Vec::new(),
            def: Vec::new(),
            max_rep: 0,
            max_def: field.nullable as u16,
            values: shape.empty_values(),
        },
        None => leaf_paths(field)[leaf].empty_levels(),
    }
}

fn dictionary_bytes(codec: &Codec) -> u64 {
    codec.dictionary.as_ref().map_or(0, |d| d.data_len() as u64 + 8 * d.len() as u64)
}

impl FileReader {
    /// Reads the footer, the metadata block and every miniblock search cache.
    pub fn open(io: IoEngine) -> Result<Self> {
        let mut reader = Self::open_metadata(io)?;
        reader.load_search_cache()?;
        Ok(reader)
    }

    /// Reads only the footer and the metadata block.
    pub fn open_metadata(io: IoEngine) -> Result<Self> {
        let len = io.len();
        if len < FOOTER_LEN + super::meta::HEADER_LEN {
            return Err(Error::corrupt(0, format!("file of {len} bytes is too short")));
        }
        let footer_bytes = io.read(len - FOOTER_LEN..len, ReadTag::Metadata)?;
        let footer = Footer::parse(&footer_bytes, len)?;
        let meta = io.read(footer.meta_offset..footer.meta_offset + footer.meta_len, ReadTag::Metadata)?;
        let columns = read_metadata(&meta, footer.meta_offset, footer.meta_offset)?;
        if columns.len() != footer.column_count as usize {
            return Err(Error::corrupt(footer.meta_offset, "column count differs from footer"));
        }
        for c in &columns {
            for leaf in leaves_of(&c.storage) {
                let mut next = 0;
                for p in &leaf.pages {
                    if p.row_start != next || p.row_count == 0 {
                        return Err(Error::corrupt(footer.meta_offset, "pages do not tile the rows"));
                    }
                    next += p.row_count;
                }
                if next != footer.row_count {
                    return Err(Error::corrupt(footer.meta_offset, "page rows differ from file rows"));
                }
            }
            if let ColumnStorage::Arrow(layout) = &c.storage {
                if layout.len != footer.row_count {
                    return Err(Error::corrupt(footer.meta_offset, "arrow column length differs from file rows"));
                }
            }
        }
        let caches = columns
            .iter()
            .map(|c| leaves_of(&c.storage).iter().map(|l| vec![None; l.pages.len()]).collect())
            .collect();
        Ok(Self { io, footer, columns, caches, cache_loaded: false })
    }

    /// Fetches all miniblock search caches in one batch of reads.
    pub fn load_search_cache(&mut self) -> Result<()> {
        if self.cache_loaded {
            return Ok(());
        }
        let mut slots = Vec::new();
        let mut requests = Vec::new();
        for (c, col) in self.columns.iter().enumerate() {
            for (l, leaf) in leaves_of(&col.storage).into_iter().enumerate() {
                for (p, page) in leaf.pages.iter().enumerate() {
                    if let PageLayout::MiniBlock { cache, .. } = &page.layout {
                        slots.push((c, l, p));
                        requests.push(ReadRequest::new(cache.range(), ReadTag::SearchCache));
                    }
                }
            }
        }
        let bufs = self.io.submit(&requests)?;
        for ((c, l, p), bytes) in slots.into_iter().zip(bufs) {
            let page = &leaves_of(&self.columns[c].storage)[l].pages[p];
            let PageLayout::MiniBlock { layout, chunk_count, cache, .. } = &page.layout else {
                unreachable!()
            };
            let (words, rep) = parse_cache(&bytes, *chunk_count as usize, layout.has_rep_index(), cache.offset)?;
            self.caches[c][l][p] = Some(ChunkCache::new(words, rep, layout.value_count, layout.row_count)?);
        }
        self.cache_loaded = true;
        Ok(())
    }

    /// The same metadata and caches over another engine, which must read
    /// the same bytes. Used to give concurrent readers separate counters.
    pub fn with_io(&self, io: IoEngine) -> Self {
        Self { io, ..self.clone() }
    }

    pub fn io(&self) -> &IoEngine {
        &self.io
    }

    pub fn footer(&self) -> &Footer {
        &self.footer
    }

    pub fn row_count(&self) -> u64 {
        self.footer.row_count
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn schema(&self) -> Vec<Field> {
        self.columns.iter().map(|c| c.field.clone()).collect()
    }

    /// Layout of every column as recorded in the file. Needs the search
    /// caches, which [`FileReader::open`] loads.
    pub fn summary(&self) -> Result<Vec<ColumnSummary>> {
        if !self.cache_loaded {
            return Err(Error::invalid("search caches are not loaded"));
        }
        // buffers are laid out in metadata order, so spans follow from a cursor
        let mut cursor = super::meta::HEADER_LEN;
        let mut out = Vec::with_capacity(self.columns.len());
        for (c, col) in self.columns.iter().enumerate() {
            let start = cursor;
            let mut pages = Vec::new();
            for (l, leaf) in leaves_of(&col.storage).into_iter().enumerate() {
                for (p, page) in leaf.pages.iter().enumerate() {
                    let page_start = cursor;
                    let dictionary = dictionary_bytes(page.layout.codec());
                    let (encoding, index, data) = match &page.layout {
                        PageLayout::FullZip { rep_index, data, .. } => (StructuralEncoding::FullZip, rep_index, data),
                        PageLayout::MiniBlock { cache, data, .. } => (StructuralEncoding::MiniBlock, cache, data),
                    };
                    cursor = cursor.max(index.offset + index.length).max(data.offset + data.length);
                    let mut summary = PageSummary {
                        leaf: l,
                        encoding,
                        row_start: page.row_start,
                        rows: page.row_count,
                        chunks: 0,
                        data_bytes: cursor - page_start,
                        index_bytes: index.length,
                        cache_bytes: dictionary,
                        chunk_histogram: BTreeMap::new(),
                    };
                    if let Some(cache) = &self.caches[c][l][p] {
                        summary.chunks = cache.chunk_count();
                        summary.cache_bytes += cache.heap_bytes() as u64;
                        for i in 0..cache.chunk_count() {
                            *summary.chunk_histogram.entry(cache.chunk(i).entries).or_default() += 1;
                        }
                    }
                    pages.push(summary);
                }
            }
            if let ColumnStorage::Arrow(layout) = &col.storage {
                for e in layout.root.extents() {
                    cursor = cursor.max(e.offset + e.length);
                }
            }
            let storage = match col.storage {
                ColumnStorage::Shredded(_) => "shredded",
                ColumnStorage::Packed { .. } => "packed",
                ColumnStorage::Arrow(_) => "arrow",
            };
            out.push(ColumnSummary { name: col.field.name.clone(), storage, pages, data_bytes: cursor - start });
        }
        Ok(out)
    }

    /// Memory held for random access: search caches and dictionaries.
    pub fn cache_bytes(&self) -> u64 {
        let caches: u64 = self.caches.iter().flatten().flatten().flatten().map(|c| c.heap_bytes() as u64).sum();
        let dicts: u64 = self
            .columns
            .iter()
            .flat_map(|c| leaves_of(&c.storage))
            .flat_map(|l| &l.pages)
            .map(|p| dictionary_bytes(p.layout.codec()))
            .sum();
        caches + dicts
    }

    /// Resolves `name` or `name.child`.
    pub fn projection(&self, selection: &str) -> Result<Projection> {
        let find = |name: &str| self.columns.iter().position(|c| c.field.name == name);
        if let Some(column) = find(selection) {
            let field = self.columns[column].field.clone();
            let leaves = 0..field.data_type.leaf_count();
            return Ok(Projection { column, child: None, field, leaves });
        }
        let unknown = || Error::invalid(format!("no column named '{selection}'"));
        let (name, child_name) = selection.split_once('.').ok_or_else(unknown)?;
        let column = find(name).ok_or_else(unknown)?;
        let field = &self.columns[column].field;
        let DataType::Struct(children) = &field.data_type else {
            return Err(Error::invalid(format!("column '{name}' is not a struct")));
        };
        let child = children.iter().position(|f| f.name == child_name).ok_or_else(unknown)?;
        let first: usize = children[..child].iter().map(|f| f.data_type.leaf_count()).sum();
        let leaves = first..first + children[child].data_type.leaf_count();
        let field = Field::new(field.name.clone(), DataType::Struct(vec![children[child].clone()]), field.nullable);
        Ok(Projection { column, child: Some(child), field, leaves })
    }

    fn projections(&self, selection: &[&str]) -> Result<Vec<Projection>> {
        selection.iter().map(|s| self.projection(s)).collect()
    }

    /// Reads every row of the selected columns.
    pub fn scan(&self, selection: &[&str]) -> Result<Vec<LogicalArray>> {
        self.projections(selection)?.iter().map(|p| self.scan_projection(p)).collect()
    }

    fn scan_leaf(&self, field: &Field, leaf_index: usize, packed: Option<LeafShape>, leaf: &LeafColumn) -> Result<RepDefLevels> {
        let requests: Vec<ReadRequest> = leaf
            .pages
            .iter()
            .map(|p| match &p.layout {
                PageLayout::FullZip { data, .. } => ReadRequest::new(data.range(), ReadTag::Data),
                PageLayout::MiniBlock { cache, data, .. } => ReadRequest::new(cache.offset..data.offset + data.length, ReadTag::Data),
            })
            .collect();
        let bufs = self.io.submit(&requests)?;
        let mut out = empty_levels(field, leaf_index, packed);
        for (p, bytes) in leaf.pages.iter().zip(bufs) {
            let levels = match &p.layout {
                PageLayout::FullZip { layout, .. } => decode_full_zip_scan(layout, &bytes)?,
                PageLayout::MiniBlock { layout, chunk_count, cache, data } => {
                    let (chunk_words, rep_index) =
                        parse_cache(&bytes[..cache.length as usize], *chunk_count as usize, layout.has_rep_index(), cache.offset)?;
                    let skip = (data.offset - cache.offset) as usize;
                    let page = MiniBlockPage { layout: layout.clone(), chunk_words, rep_index, data: bytes[skip..].to_vec() };
                    let levels = decode_miniblock_scan(&page)?;
                    if levels.num_rows() as u64 != p.row_count {
                        return Err(Error::corrupt(data.offset, "page row count mismatch"));
                    }
                    levels
                }
            };
            out.extend(&levels);
        }
        Ok(out)
    }

    fn scan_projection(&self, proj: &Projection) -> Result<LogicalArray> {
        let column = &self.columns[proj.column];
        let whole = match &column.storage {
            ColumnStorage::Arrow(layout) => scan_arrow(&self.io, layout)?,
            ColumnStorage::Packed { layout, leaf } => {
                let levels = self.scan_leaf(&column.field, 0, Some(layout.shape()), leaf)?;
                unpack_struct(&column.field, layout, &levels)?
            }
            ColumnStorage::Shredded(leaves) => {
                let levels = proj
                    .leaves
                    .clone()
                    .map(|i| self.scan_leaf(&column.field, i, None, &leaves[i]))
                    .collect::<Result<Vec<_>>>()?;
                return unshred(&proj.field, &levels);
            }
        };
        match proj.child {
            Some(child) => struct_subset(&whole, child),
            None => Ok(whole),
        }
    }

    /// Fetches `rows` (any order, duplicates allowed) of the selected columns.
    pub fn take(&self, selection: &[&str], rows: &[u64]) -> Result<Vec<LogicalArray>> {
        Ok(self.take_with_stats(selection, rows)?.0)
    }

    pub fn take_with_stats(&self, selection: &[&str], rows: &[u64]) -> Result<(Vec<LogicalArray>, TakeStats)> {
        let projections = self.projections(selection)?;
        if let Some(bad) = rows.iter().find(|r| **r >= self.footer.row_count) {
            return Err(Error::OutOfRange { index: *bad, len: self.footer.row_count });
        }
        let mut unique = rows.to_vec();
        unique.sort_unstable();
        unique.dedup();
        let positions: Vec<usize> = rows.iter().map(|r| unique.binary_search(r).unwrap()).collect();
        let restore = positions.iter().enumerate().any(|(i, p)| *p != i) || rows.len() != unique.len();

        let mut stats = TakeStats::default();
        let mut out = Vec::with_capacity(projections.len());
        for proj in &projections {
            let array = self.take_projection(proj, &unique, &mut stats)?;
            out.push(if restore { array.take(&positions)? } else { array });
        }
        Ok((out, stats))
    }

    fn take_projection(&self, proj: &Projection, rows: &[u64], stats: &mut TakeStats) -> Result<LogicalArray> {
        let column = &self.columns[proj.column];
        let whole = match &column.storage {
            ColumnStorage::Arrow(layout) => {
                let (array, trace) = take_arrow(&self.io, layout, rows)?;
                // each phase is submitted on its own, so reads only merge within a phase
                for phase in 1..=trace.phases() {
                    let requests: Vec<_> =
                        trace.entries.iter().filter(|e| e.phase == phase).map(|e| e.request.clone()).collect();
                    stats.planned_iops += self.io.planned_iops(&requests);
                }
                stats.phases = stats.phases.max(trace.phases());
                array
            }
            ColumnStorage::Packed { layout, leaf } => {
                let levels = self.take_leaf(proj.column, 0, &column.field, Some(layout.shape()), leaf, rows, stats)?;
                unpack_struct(&column.field, layout, &levels)?
            }
            ColumnStorage::Shredded(leaves) => {
                let levels = proj
                    .leaves
                    .clone()
                    .map(|i| self.take_leaf(proj.column, i, &column.field, None, &leaves[i], rows, stats))
                    .collect::<Result<Vec<_>>>()?;
                return unshred(&proj.field, &levels);
            }
        };
        match proj.child {
            Some(child) => struct_subset(&whole, child),
            None => Ok(whole),
        }
    }

    fn cache(&self, column: usize, leaf: usize, page: usize) -> Result<&ChunkCache> {
        self.caches[column][leaf][page]
            .as_ref()
            .ok_or_else(|| Error::invalid("search cache not loaded; open the file with FileReader::open"))
    }

    /// Levels of sorted, distinct `rows` of one leaf column.
    #[allow(clippy::too_many_arguments)]
    fn take_leaf(
        &self,
        column: usize,
        leaf_index: usize,
        field: &Field,
        packed: Option<LeafShape>,
        leaf: &LeafColumn,
        rows: &[u64],
        stats: &mut TakeStats,
    ) -> Result<RepDefLevels> {
        enum Plan {
            /// Request index holding the row's records.
            Direct(usize),
            /// Request index of the rep-index slice.
            Indexed(usize),
            /// Chunks and rows to skip within the first.
            Chunks(usize, Range<usize>, u64),
        }
        let mut first = Vec::new();
        let mut plans = Vec::with_capacity(rows.len());
        let mut chunk_requests: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &row in rows {
            let p = leaf.pages.partition_point(|pg| pg.row_start + pg.row_count <= row);
            let page: &PageMeta = &leaf.pages[p];
            let local = row - page.row_start;
            match &page.layout {
                PageLayout::FullZip { layout, rep_index, data } => match locate_rows(layout, local..local + 1)? {
                    RowLocation::Direct(r) => {
                        first.push(ReadRequest::new(data.offset + r.start..data.offset + r.end, ReadTag::Data));
                        plans.push((p, Plan::Direct(first.len() - 1)));
                    }
                    RowLocation::Indexed(r) => {
                        first.push(ReadRequest::new(rep_index.offset + r.start..rep_index.offset + r.end, ReadTag::RepIndex));
                        plans.push((p, Plan::Indexed(first.len() - 1)));
                    }
                },
                PageLayout::MiniBlock { data, .. } => {
                    let cache = self.cache(column, leaf_index, p)?;
                    let span = cache.locate_rows(local..local + 1)?;
                    for c in span.chunks.clone() {
                        chunk_requests.entry((p, c)).or_insert_with(|| {
                            let info = cache.chunk(c);
                            let start = data.offset + info.offset;
                            first.push(ReadRequest::new(start..start + info.body_bytes, ReadTag::Data));
                            first.len() - 1
                        });
                    }
                    plans.push((p, Plan::Chunks(p, span.chunks, span.skip_rows)));
                }
            }
        }
        stats.add(&self.io, &first);
        let first_bufs = self.io.submit(&first)?;
        if !first.is_empty() {
            stats.phases = stats.phases.max(1);
        }

        let mut second = Vec::new();
        let mut second_slot = vec![usize::MAX; plans.len()];
        for (i, (p, plan)) in plans.iter().enumerate() {
            if let Plan::Indexed(req) = plan {
                let PageLayout::FullZip { layout, data, .. } = &leaf.pages[*p].layout else { unreachable!() };
                let r = data_range_from_index(layout, &first_bufs[*req], 1)?;
                if r.end > data.length {
                    return Err(Error::corrupt(first[*req].offset, "rep index points past page data"));
                }
                second.push(ReadRequest::new(data.offset + r.start..data.offset + r.end, ReadTag::Data));
                second_slot[i] = second.len() - 1;
            }
        }
        stats.add(&self.io, &second);
        let second_bufs = self.io.submit(&second)?;
        if !second.is_empty() {
            stats.phases = stats.phases.max(2);
        }

        let mut decoded: BTreeMap<(usize, usize), RepDefLevels> = BTreeMap::new();
        let mut out = empty_levels(field, leaf_index, packed);
        for (i, (p, plan)) in plans.iter().enumerate() {
            let page = &leaf.pages[*p];
            let levels = match (plan, &page.layout) {
                (Plan::Direct(req), PageLayout::FullZip { layout, .. }) => {
                    decode_rows(layout, &first_bufs[*req], 1, first[*req].offset)?
                }
                (Plan::Indexed(_), PageLayout::FullZip { layout, .. }) => {
                    let req = second_slot[i];
                    decode_rows(layout, &second_bufs[req], 1, second[req].offset)?
                }
                (Plan::Chunks(p, chunks, skip), PageLayout::MiniBlock { layout, .. }) => {
                    let cache = self.cache(column, leaf_index, *p)?;
                    for c in chunks.clone() {
                        if let std::collections::btree_map::Entry::Vacant(e) = decoded.entry((*p, c)) {
                            let req = chunk_requests[&(*p, c)];
                            let body: &Bytes = &first_bufs[req];
                            let levels = decode_chunk(layout, body, cache.chunk(c).entries as usize, first[req].offset)?;
                            e.insert(levels);
                        }
                    }
                    if chunks.len() == 1 {
                        out.extend(&select_rows(&decoded[&(*p, chunks.start)], *skip, 1)?);
                        continue;
                    }
                    let mut fragment: Option<RepDefLevels> = None;
                    for c in chunks.clone() {
                        let part = &decoded[&(*p, c)];
                        match &mut fragment {
                            Some(f) => f.extend(part),
                            None => fragment = Some(part.clone()),
                        }
                    }
                    let fragment = fragment.ok_or_else(|| Error::corrupt(0, "row maps to no chunk"))?;
                    select_rows(&fragment, *skip, 1)?
                }
                _ => unreachable!(),
            };
            out.extend(&levels);
        }
        Ok(out)
    }
}
