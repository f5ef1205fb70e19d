// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Miniblock structural encoding.
//!
//! Leaf entries are cut into small chunks that are decoded as a whole. Each
//! chunk is described by a two-byte meta word (low 12 bits: 8-byte words in
//! the body, high 4 bits: log2 of the entry count) so the per-chunk search
//! cache stays tiny. The body is
//!
//! ```text
//! u16 buffer_count | u16 size * buffer_count | buffers, each 8-byte aligned
//! ```
//!
//! with buffers in the order repetition levels, definition levels, data.
//! Rows may straddle chunks; columns with lists carry a per-chunk
//! repetition index of (rows completed in the chunk, trailing entries).

use std::ops::Range;

use crate::codecs::{bitpack, Codec};
use crate::repdef::{LevelWidths, RepDefLevels};
use crate::{Error, Result};

pub const MAX_CHUNK_VALUES: usize = 4096;
pub const MAX_CHUNK_WORDS: usize = 4095;
pub const MAX_CHUNK_BYTES: usize = MAX_CHUNK_WORDS * 8;
/// Default limit on the buffer bytes of one chunk.
pub const DEFAULT_CHUNK_BUDGET: usize = 8192;
/// The search cache keeps absolute positions every this many chunks.
pub const CHECKPOINT_INTERVAL: usize = 256;

/// Packs a power-of-two entry count and an aligned body size.
pub fn encode_chunk_meta(value_count: usize, body_bytes: usize) -> Result<u16> {
    if value_count == 0 || !value_count.is_power_of_two() || value_count > MAX_CHUNK_VALUES {
        return Err(Error::invalid(format!(
            "chunk value count {value_count} is not a power of two in 1..=4096"
        )));
    }
    encode_meta_log2(value_count.trailing_zeros(), body_bytes)
}

fn encode_meta_log2(log2: u32, body_bytes: usize) -> Result<u16> {
    if body_bytes == 0 || !body_bytes.is_multiple_of(8) || body_bytes > MAX_CHUNK_BYTES {
        return Err(Error::invalid(format!(
            "chunk body of {body_bytes} bytes is not a multiple of 8 in 8..={MAX_CHUNK_BYTES}"
        )));
    }
    Ok(((log2 as u16) << 12) | (body_bytes / 8) as u16)
}

/// Inverse of [`encode_chunk_meta`]: `(value_count, body_bytes)`.
pub fn decode_chunk_meta(word: u16) -> (usize, usize) {
    (1usize << (word >> 12), (word & 0x0FFF) as usize * 8)
}

/// Meta word for a chunk of any size; a non-power-of-two count (only
/// allowed for a page's last chunk) is rounded up.
fn chunk_meta(value_count: usize, body_bytes: usize) -> Result<u16> {
    let log2 = value_count.next_power_of_two().trailing_zeros();
    encode_meta_log2(log2, body_bytes)
}

/// Lays out buffers into a chunk body.
pub fn encode_chunk_body(buffers: &[&[u8]]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&(buffers.len() as u16).to_le_bytes());
    for b in buffers {
        let len = u16::try_from(b.len())
            .map_err(|_| Error::invalid(format!("chunk buffer of {} bytes", b.len())))?;
        out.extend_from_slice(&len.to_le_bytes());
    }
    for b in buffers {
        pad8(&mut out);
        out.extend_from_slice(b);
    }
    pad8(&mut out);
    if out.len() > MAX_CHUNK_BYTES {
        return Err(Error::invalid(format!("chunk body of {} bytes exceeds 32 KiB", out.len())));
    }
    Ok(out)
}

fn pad8(out: &mut Vec<u8>) {
    out.resize(out.len().next_multiple_of(8), 0);
}

/// Splits a chunk body into its buffers. `base` is used for error offsets.
pub fn decode_chunk_body(body: &[u8], base: u64) -> Result<Vec<&[u8]>> {
    let err = |at: usize, msg: String| Error::corrupt(base + at as u64, msg);
    if body.len() < 2 {
        return Err(err(0, "chunk body too short".into()));
    }
    let count = u16::from_le_bytes([body[0], body[1]]) as usize;
    let header = 2 + 2 * count;
    if body.len() < header {
        return Err(err(0, format!("chunk declares {count} buffers but is {} bytes", body.len())));
    }
    let mut pos = header;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let len = u16::from_le_bytes([body[2 + 2 * i], body[3 + 2 * i]]) as usize;
        pos = pos.next_multiple_of(8);
        if pos + len > body.len() {
            return Err(err(pos, format!("buffer {i} of {len} bytes overruns the chunk")));
        }
        out.push(&body[pos..pos + len]);
        pos += len;
    }
    if pos.next_multiple_of(8) != body.len() {
        return Err(err(pos, "chunk body has trailing bytes".into()));
    }
    Ok(out)
}

/// Metadata needed to decode miniblock chunks.
#[derive(Debug, Clone)]
pub struct MiniBlockLayout {
    pub max_rep: u16,
    pub max_def: u16,
    pub codec: Codec,
    /// Leaf entries (levels) in the page.
    pub value_count: u64,
    pub row_count: u64,
}

impl MiniBlockLayout {
    pub fn widths(&self) -> LevelWidths {
        LevelWidths::new(self.max_rep, self.max_def)
    }

    pub fn has_rep_index(&self) -> bool {
        self.max_rep > 0
    }

    fn buffer_count(&self) -> usize {
        let w = self.widths();
        (w.rep_bits > 0) as usize + (w.def_bits > 0) as usize + self.codec.chunk_buffer_count()
    }
}

/// Repetition-index entry of one chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChunkRepIndex {
    /// Rows whose last entry lies in this chunk.
    pub rows_completed: u16,
    /// Entries after the end of the last completed row.
    pub trailing: u16,
}

#[derive(Debug, Clone)]
pub struct MiniBlockPage {
    pub layout: MiniBlockLayout,
    pub chunk_words: Vec<u16>,
    /// One entry per chunk when the column has lists, else empty.
    pub rep_index: Vec<ChunkRepIndex>,
    /// Concatenated chunk bodies.
    pub data: Vec<u8>,
}

impl MiniBlockPage {
    pub fn chunk_count(&self) -> usize {
        self.chunk_words.len()
    }

    /// `(byte range in data, entry count)` of every chunk.
    pub fn chunk_extents(&self) -> Vec<(Range<usize>, usize)> {
        let mut out = Vec::with_capacity(self.chunk_words.len());
        let mut offset = 0;
        let mut remaining = self.layout.value_count as usize;
        for (i, w) in self.chunk_words.iter().enumerate() {
            let (n, bytes) = decode_chunk_meta(*w);
            let n = if i + 1 == self.chunk_words.len() { remaining } else { n };
            out.push((offset..offset + bytes, n));
            offset += bytes;
            remaining -= n.min(remaining);
        }
        out
    }
}

fn level_buffer(levels: &[u16], bits: u8) -> Vec<u8> {
    let mut out = Vec::with_capacity(bitpack::packed_len(levels.len(), bits));
    bitpack::pack(levels.iter().map(|v| *v as u64), bits, &mut out);
    out
}

fn chunk_buffers(levels: &RepDefLevels, range: Range<usize>, value_start: usize, codec: &Codec) -> Result<(Vec<Vec<u8>>, usize)> {
    let widths = levels.widths();
    let mut buffers = Vec::new();
    if widths.rep_bits > 0 {
        buffers.push(level_buffer(&levels.rep[range.clone()], widths.rep_bits));
    }
    if widths.def_bits > 0 {
        buffers.push(level_buffer(&levels.def[range.clone()], widths.def_bits));
    }
    let defs = &levels.def[range];
    let values = defs.iter().filter(|d| **d == 0).count();
    let slice = levels.values.slice(value_start..value_start + values);
    let mut data = codec.chunk_buffers(codec.encode(&slice)?);
    if data.len() == 2 {
        data[0] = spread_lengths(&data[0], defs);
    }
    buffers.extend(data);
    Ok((buffers, values))
}

/// Widens a length buffer holding one length per valid value to one length
/// per entry, with 0 for entries that carry no value.
fn spread_lengths(lengths: &[u8], defs: &[u16]) -> Vec<u8> {
    let valid = defs.iter().filter(|d| **d == 0).count();
    let width = lengths.len().checked_div(valid).unwrap_or(1);
    let mut out = Vec::with_capacity(defs.len() * width);
    let mut next = lengths.chunks_exact(width.max(1));
    for d in defs {
        if *d == 0 {
            if let Some(len) = next.next() {
                out.extend_from_slice(len);
                continue;
            }
        }
        out.resize(out.len() + width, 0);
    }
    out
}

/// Inverse of [`spread_lengths`].
fn gather_lengths(lengths: &[u8], defs: &[u16], base: u64) -> Result<Vec<u8>> {
    if defs.is_empty() || !lengths.len().is_multiple_of(defs.len()) {
        return Err(Error::corrupt(base, "length buffer does not match entry count"));
    }
    let width = lengths.len() / defs.len();
    let mut out = Vec::new();
    for (d, len) in defs.iter().zip(lengths.chunks_exact(width)) {
        if *d == 0 {
            out.extend_from_slice(len);
        } else if len.iter().any(|b| *b != 0) {
            return Err(Error::corrupt(base, "non-zero length for an entry without a value"));
        }
    }
    Ok(out)
}

fn rep_index_for(levels: &RepDefLevels, range: Range<usize>, page_end: usize) -> ChunkRepIndex {
    // A row completes at entry e when entry e + 1 starts a new row or e is
    // the last entry of the page.
    let mut rows_completed = 0u16;
    let mut last_end = range.start;
    for e in range.clone() {
        let next_starts = e + 1 == page_end || levels.rep[e + 1] == levels.max_rep;
        if next_starts {
            rows_completed += 1;
            last_end = e + 1;
        }
    }
    ChunkRepIndex {
        rows_completed,
        trailing: (range.end - last_end) as u16,
    }
}

/// Cuts `levels` into chunks whose buffers total at most `budget` bytes.
///
/// Each chunk holds the largest power of two of entries (at most 4096) that
/// fits; the last chunk may hold any remainder that fits.
pub fn encode_miniblock(levels: &RepDefLevels, codec: &Codec, budget: usize) -> Result<MiniBlockPage> {
    levels.check()?;
    if levels.widths().rep_bits > 16 || levels.widths().def_bits > 16 {
        return Err(Error::Unsupported("levels wider than 16 bits".into()));
    }
    let budget = budget.min(MAX_CHUNK_BYTES - 2 - 2 * 8 - 8 * 8);
    let total = levels.len();
    let mut page = MiniBlockPage {
        layout: MiniBlockLayout {
            max_rep: levels.max_rep,
            max_def: levels.max_def,
            codec: codec.clone(),
            value_count: total as u64,
            row_count: levels.num_rows() as u64,
        },
        chunk_words: Vec::new(),
        rep_index: Vec::new(),
        data: Vec::new(),
    };
    let mut start = 0;
    let mut value_start = 0;
    while start < total {
        let mut n = MAX_CHUNK_VALUES;
        let (take, buffers, values) = loop {
            let take = n.min(total - start);
            let (buffers, values) = chunk_buffers(levels, start..start + take, value_start, codec)?;
            let size: usize = buffers.iter().map(Vec::len).sum();
            if size <= budget {
                break (take, buffers, values);
            }
            if take == 1 {
                return Err(Error::Routing(format!(
                    "a single entry needs {size} bytes, over the {budget}-byte chunk budget; use full-zip"
                )));
            }
            n = take.next_power_of_two() / 2;
        };
        let refs: Vec<&[u8]> = buffers.iter().map(Vec::as_slice).collect();
        let body = encode_chunk_body(&refs)?;
        page.chunk_words.push(chunk_meta(take, body.len())?);
        if page.layout.has_rep_index() {
            page.rep_index.push(rep_index_for(levels, start..start + take, total));
        }
        page.data.extend_from_slice(&body);
        start += take;
        value_start += values;
    }
    Ok(page)
}

/// Decodes one chunk body of `entries` entries.
pub fn decode_chunk(layout: &MiniBlockLayout, body: &[u8], entries: usize, base: u64) -> Result<RepDefLevels> {
    let buffers = decode_chunk_body(body, base)?;
    if buffers.len() != layout.buffer_count() {
        return Err(Error::corrupt(
            base,
            format!("chunk has {} buffers, expected {}", buffers.len(), layout.buffer_count()),
        ));
    }
    let widths = layout.widths();
    let mut next = 0;
    let mut levels_from = |bits: u8| -> Result<Vec<u16>> {
        if bits == 0 {
            return Ok(vec![0; entries]);
        }
        let buf = buffers[next];
        next += 1;
        let raw = bitpack::unpack(buf, bits, entries).map_err(|_| Error::corrupt(base, "level buffer too short"))?;
        Ok(raw.into_iter().map(|v| v as u16).collect())
    };
    let rep = levels_from(widths.rep_bits)?;
    let def = levels_from(widths.def_bits)?;
    if rep.iter().any(|r| *r > layout.max_rep) || def.iter().any(|d| *d > layout.max_def) {
        return Err(Error::corrupt(base, "chunk levels out of range"));
    }
    let value_count = def.iter().filter(|d| **d == 0).count();
    let gathered;
    let mut data: Vec<&[u8]> = buffers[next..].to_vec();
    if data.len() == 2 {
        gathered = gather_lengths(data[0], &def, base)?;
        data[0] = &gathered;
    }
    let values = layout
        .codec
        .decode_chunk_buffers(&data, value_count)
        .map_err(|e| match e {
            Error::Corrupt { message, .. } => Error::corrupt(base, message),
            other => other,
        })?;
    Ok(RepDefLevels {
        rep,
        def,
        max_rep: layout.max_rep,
        max_def: layout.max_def,
        values,
    })
}

/// Decodes every chunk of a page in order.
pub fn decode_miniblock_scan(page: &MiniBlockPage) -> Result<RepDefLevels> {
    let mut out: Option<RepDefLevels> = None;
    for (range, n) in page.chunk_extents() {
        if range.end > page.data.len() {
            return Err(Error::corrupt(range.start as u64, "chunk extends past page data"));
        }
        let frag = decode_chunk(&page.layout, &page.data[range.clone()], n, range.start as u64)?;
        match &mut out {
            Some(acc) => acc.extend(&frag),
            None => out = Some(frag),
        }
    }
    let out = out.unwrap_or_else(|| RepDefLevels {
        rep: Vec::new(),
        def: Vec::new(),
        max_rep: page.layout.max_rep,
        max_def: page.layout.max_def,
        values: page.layout.codec.shape.empty_values(),
    });
    if out.len() as u64 != page.layout.value_count {
        return Err(Error::corrupt(page.data.len() as u64, "page entry count mismatch"));
    }
    Ok(out)
}

/// Takes `count` rows out of a decoded fragment, skipping the first
/// `skip_rows` row starts (entries before the first row start belong to a
/// row that began in an earlier chunk and are dropped).
pub fn select_rows(fragment: &RepDefLevels, skip_rows: u64, count: u64) -> Result<RepDefLevels> {
    let first = skip_rows as usize;
    let last = first + count as usize;
    // entry index of row starts `first` and `last`, scanning no further than needed
    let (mut begin, mut end, mut seen) = (fragment.len(), fragment.len(), 0);
    for (i, r) in fragment.rep.iter().enumerate() {
        if *r == fragment.max_rep {
            if seen == first {
                begin = i;
            }
            if seen == last {
                end = i;
                break;
            }
            seen += 1;
        }
    }
    if seen < last {
        return Err(Error::corrupt(0, format!("fragment holds {seen} row starts, need {last}")));
    }
    Ok(fragment.slice_entries(begin..end))
}

/// Positions of one chunk, derived from the search cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkInfo {
    /// Byte offset of the body relative to the page data.
    pub offset: u64,
    pub body_bytes: u64,
    pub first_entry: u64,
    pub entries: u64,
    /// Rows completed before this chunk.
    pub rows_before: u64,
    /// Rows whose last entry lies in this chunk.
    pub rows_completed: u64,
    /// Whether the chunk ends inside a row that continues in the next chunk.
    pub continues: bool,
}

/// Packed in-memory form of a [`ChunkRepIndex`]: rows completed in the low
/// 13 bits, "ends mid-row" in the top bit. Only the fact that trailing
/// entries exist matters for lookups, not their number.
const CONTINUES_BIT: u16 = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Checkpoint {
    offset: u64,
    entries: u64,
    rows: u64,
}

/// In-memory search cache of one miniblock page.
///
/// Holds the two-byte chunk words, a packed two-byte repetition entry per
/// chunk when the column has lists, and an absolute checkpoint every
/// [`CHECKPOINT_INTERVAL`] chunks, so a lookup walks at most 255 words.
#[derive(Debug, Clone)]
pub struct ChunkCache {
    words: Vec<u16>,
    rep: Vec<u16>,
    checkpoints: Vec<Checkpoint>,
    value_count: u64,
    row_count: u64,
}

impl ChunkCache {
    pub fn new(words: Vec<u16>, rep: Vec<ChunkRepIndex>, value_count: u64, row_count: u64) -> Result<Self> {
        if !rep.is_empty() && rep.len() != words.len() {
            return Err(Error::corrupt(0, "rep index length differs from chunk count"));
        }
        if rep.iter().any(|r| r.rows_completed as usize > MAX_CHUNK_VALUES) {
            return Err(Error::corrupt(0, "rep index claims more rows than a chunk holds"));
        }
        let rep: Vec<u16> = rep
            .iter()
            .map(|r| r.rows_completed | if r.trailing > 0 { CONTINUES_BIT } else { 0 })
            .collect();
        let mut checkpoints = Vec::with_capacity(words.len().div_ceil(CHECKPOINT_INTERVAL));
        let mut at = Checkpoint::default();
        for (i, w) in words.iter().enumerate() {
            if i % CHECKPOINT_INTERVAL == 0 {
                checkpoints.push(at);
            }
            let (n, bytes) = decode_chunk_meta(*w);
            at.offset += bytes as u64;
            at.entries += n as u64;
            at.rows += rep.get(i).map_or(n as u64, |r| (r & !CONTINUES_BIT) as u64);
        }
        let cache = Self { words, rep, checkpoints, value_count, row_count };
        if let Some(last) = cache.words.len().checked_sub(1) {
            let info = cache.chunk(last);
            if info.first_entry >= value_count || info.first_entry + (1 << (cache.words[last] >> 12)) < value_count {
                return Err(Error::corrupt(0, "chunk words disagree with page entry count"));
            }
        } else if value_count != 0 {
            return Err(Error::corrupt(0, "page has entries but no chunks"));
        }
        Ok(cache)
    }

    pub fn from_page(page: &MiniBlockPage) -> Result<Self> {
        Self::new(page.chunk_words.clone(), page.rep_index.clone(), page.layout.value_count, page.layout.row_count)
    }

    pub fn chunk_count(&self) -> usize {
        self.words.len()
    }

    pub fn has_rep_index(&self) -> bool {
        !self.rep.is_empty()
    }

    /// Heap bytes held by this cache.
    pub fn heap_bytes(&self) -> usize {
        self.words.len() * std::mem::size_of::<u16>()
            + self.rep.len() * std::mem::size_of::<u16>()
            + self.checkpoints.len() * std::mem::size_of::<Checkpoint>()
    }

    /// Adds chunk `i` to the running position `at`.
    fn advance(&self, at: &mut Checkpoint, i: usize) {
        let (n, bytes) = decode_chunk_meta(self.words[i]);
        at.offset += bytes as u64;
        at.entries += n as u64;
        at.rows += self.rep.get(i).map_or(n as u64, |r| (r & !CONTINUES_BIT) as u64);
    }

    /// Describes chunk `index`, which starts at position `at`.
    fn info_at(&self, at: &Checkpoint, index: usize) -> ChunkInfo {
        let (n, bytes) = decode_chunk_meta(self.words[index]);
        let entries = if index + 1 == self.words.len() {
            self.value_count - at.entries
        } else {
            n as u64
        };
        ChunkInfo {
            offset: at.offset,
            body_bytes: bytes as u64,
            first_entry: at.entries,
            entries,
            rows_before: at.rows,
            rows_completed: self.rep.get(index).map_or(entries, |r| (r & !CONTINUES_BIT) as u64),
            continues: self.rep.get(index).is_some_and(|r| r & CONTINUES_BIT != 0),
        }
    }

    pub fn chunk(&self, index: usize) -> ChunkInfo {
        let cp = index / CHECKPOINT_INTERVAL;
        let mut at = self.checkpoints[cp];
        for i in cp * CHECKPOINT_INTERVAL..index {
            self.advance(&mut at, i);
        }
        self.info_at(&at, index)
    }

    /// First chunk whose cumulative count (through the chunk) exceeds `target`.
    fn find(&self, target: u64, key: impl Fn(&Checkpoint) -> u64, through: impl Fn(&ChunkInfo) -> u64) -> usize {
        let cp = self.checkpoints.partition_point(|c| key(c) <= target).saturating_sub(1);
        let mut i = cp * CHECKPOINT_INTERVAL;
        let mut at = self.checkpoints[cp];
        while i + 1 < self.words.len() && through(&self.info_at(&at, i)) <= target {
            self.advance(&mut at, i);
            i += 1;
        }
        i
    }

    /// Chunk holding the last entry of row `row`.
    fn chunk_completing(&self, row: u64) -> usize {
        self.find(row, |c| c.rows, |c| c.rows_before + c.rows_completed)
    }

    /// Chunks to read for rows `[start, end)` and how many row starts to
    /// skip in the decoded fragment.
    pub fn locate_rows(&self, rows: Range<u64>) -> Result<ChunkSpan> {
        if rows.start >= rows.end || rows.end > self.row_count {
            return Err(Error::OutOfRange { index: rows.end, len: self.row_count });
        }
        if !self.has_rep_index() {
            let first = self.find(rows.start, |c| c.entries, |c| c.first_entry + c.entries);
            let last = self.find(rows.end - 1, |c| c.entries, |c| c.first_entry + c.entries);
            let skip = rows.start - self.chunk(first).first_entry;
            return Ok(ChunkSpan { chunks: first..last + 1, skip_rows: skip });
        }
        let last = self.chunk_completing(rows.end - 1);
        let first = if rows.start == 0 {
            0
        } else {
            let prev = self.chunk_completing(rows.start - 1);
            let info = self.chunk(prev);
            let prev_is_last_completed = info.rows_before + info.rows_completed == rows.start;
            if prev_is_last_completed && !info.continues {
                prev + 1
            } else {
                prev
            }
        };
        let info = self.chunk(first);
        let in_progress = if first == 0 {
            0
        } else {
            self.chunk(first - 1).continues as u64
        };
        let skip = rows.start - info.rows_before - in_progress;
        Ok(ChunkSpan { chunks: first..last + 1, skip_rows: skip })
    }
}

/// Result of a search-cache lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkSpan {
    pub chunks: Range<usize>,
    pub skip_rows: u64,
}

/// Worst-case search cache of a flat column, in bytes.
pub fn cache_bytes_model(rows: u64, values_per_chunk: u64, bytes_per_chunk: u64) -> u64 {
    rows.div_ceil(values_per_chunk) * bytes_per_chunk
}
