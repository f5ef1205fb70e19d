// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Full-zip structural encoding.
//!
//! Every leaf entry becomes one record: a control word carrying the entry's
//! repetition and definition levels, then (for valid values) the compressed
//! value bytes, prefixed by their length when the codec is not dense.
//! Records are stored row-major, so a row is one contiguous byte range.
//!
//! Rows are located either by arithmetic (fixed-size records, no lists) or
//! through the repetition index: the byte offset of each row's first record
//! plus a terminal offset, stored at a fixed byte width.

use std::ops::Range;

use crate::codecs::{bitpack, Codec};
use crate::repdef::{LevelWidths, RepDefLevels};
use crate::{Error, Result};

/// Layout of the control word preceding each record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlWordSpec {
    pub rep_bits: u8,
    pub def_bits: u8,
    pub width_bytes: u8,
}

impl ControlWordSpec {
    pub fn new(widths: LevelWidths) -> Result<Self> {
        let bits = widths.rep_bits as usize + widths.def_bits as usize;
        if bits > 32 {
            return Err(Error::Unsupported(format!(
                "{bits} bits of repetition and definition do not fit a 4-byte control word"
            )));
        }
        Ok(Self {
            rep_bits: widths.rep_bits,
            def_bits: widths.def_bits,
            width_bytes: bits.div_ceil(8).max(1) as u8,
        })
    }

    pub fn encode(&self, rep: u16, def: u16) -> u32 {
        ((rep as u32) << self.def_bits) | def as u32
    }

    pub fn decode(&self, word: u32) -> (u16, u16) {
        let def_mask = (1u32 << self.def_bits) - 1;
        let rep_mask = (1u32 << self.rep_bits) - 1;
        ((word >> self.def_bits & rep_mask) as u16, (word & def_mask) as u16)
    }

    fn write(&self, rep: u16, def: u16, out: &mut Vec<u8>) {
        let word = self.encode(rep, def);
        out.extend_from_slice(&word.to_le_bytes()[..self.width_bytes as usize]);
    }
}

/// Everything needed to interpret a full-zip page except its buffers.
/// This is what the column metadata stores.
#[derive(Debug, Clone)]
pub struct FullZipLayout {
    pub control: ControlWordSpec,
    pub max_rep: u16,
    pub max_def: u16,
    pub codec: Codec,
    /// Width of the per-value length prefix; 0 when values are dense.
    pub length_width: u8,
    /// Size of every record when records are rows of a fixed size.
    pub fixed_record_width: Option<u64>,
    /// Byte width of each repetition-index entry; 0 when there is no index.
    pub index_width: u8,
    pub row_count: u64,
}

impl FullZipLayout {
    pub fn has_rep_index(&self) -> bool {
        self.fixed_record_width.is_none()
    }

    /// Size of the repetition index in bytes.
    pub fn rep_index_len(&self) -> u64 {
        if self.has_rep_index() {
            (self.row_count + 1) * self.index_width as u64
        } else {
            0
        }
    }

    fn value_width(&self) -> Option<usize> {
        self.codec.per_value_width()
    }
}

#[derive(Debug, Clone)]
pub struct FullZipPage {
    pub layout: FullZipLayout,
    pub zipped: Vec<u8>,
    /// Packed repetition index (`row_count + 1` entries), empty when the
    /// layout has fixed-size records.
    pub rep_index: Vec<u8>,
}

impl FullZipPage {
    pub fn row_count(&self) -> u64 {
        self.layout.row_count
    }

    /// Entry `i` of the repetition index.
    pub fn rep_index_entry(&self, i: usize) -> u64 {
        let w = self.layout.index_width as usize;
        bitpack::read_uint(&self.rep_index[i * w..(i + 1) * w], w as u8)
    }

    pub fn rep_index_entries(&self) -> Vec<u64> {
        (0..=self.layout.row_count as usize).map(|i| self.rep_index_entry(i)).collect()
    }
}

/// Zips `levels` into a page, compressing values with `codec` first.
pub fn encode_full_zip(levels: &RepDefLevels, codec: &Codec) -> Result<FullZipPage> {
    codec.require_transparent()?;
    levels.check()?;
    let control = ControlWordSpec::new(levels.widths())?;
    let compressed = codec.encode(&levels.values)?;
    let value_width = codec.per_value_width();

    let length_width = match value_width {
        Some(_) => 0,
        None => {
            let max = (0..compressed.value_count)
                .map(|i| compressed.extent(i).map(|r| r.len() as u64))
                .try_fold(0u64, |m, l| l.map(|l| m.max(l)))?;
            bitpack::byte_width_for(max)
        }
    };

    let mut zipped = Vec::new();
    let mut row_offsets = Vec::with_capacity(levels.len() + 1);
    let mut next_value = 0;
    for (&rep, &def) in levels.rep.iter().zip(&levels.def) {
        if rep == levels.max_rep {
            row_offsets.push(zipped.len() as u64);
        }
        control.write(rep, def, &mut zipped);
        if def == 0 {
            let bytes = compressed.value_bytes(next_value)?;
            next_value += 1;
            if length_width > 0 {
                bitpack::write_uint(bytes.len() as u64, length_width, &mut zipped);
            }
            zipped.extend_from_slice(&bytes);
        } else if let Some(w) = value_width {
            zipped.resize(zipped.len() + w, 0);
        }
    }
    let row_count = row_offsets.len() as u64;
    row_offsets.push(zipped.len() as u64);

    let fixed_record_width = match (value_width, levels.max_rep) {
        (Some(w), 0) => Some((control.width_bytes as usize + w) as u64),
        _ => None,
    };
    let (index_width, rep_index) = if fixed_record_width.is_some() {
        (0, Vec::new())
    } else {
        let w = bitpack::byte_width_for(zipped.len() as u64);
        let mut out = Vec::with_capacity(row_offsets.len() * w as usize);
        for off in &row_offsets {
            bitpack::write_uint(*off, w, &mut out);
        }
        (w, out)
    };

    Ok(FullZipPage {
        layout: FullZipLayout {
            control,
            max_rep: levels.max_rep,
            max_def: levels.max_def,
            codec: codec.clone(),
            length_width,
            fixed_record_width,
            index_width,
            row_count,
        },
        zipped,
        rep_index,
    })
}

/// Sequentially unzips records without consulting the repetition index.
/// `base` is the file offset of `bytes`, used in error messages.
fn unzip(layout: &FullZipLayout, bytes: &[u8], base: u64) -> Result<RepDefLevels> {
    let control = layout.control;
    let cw = control.width_bytes as usize;
    let value_width = layout.value_width();
    let mut levels = RepDefLevels {
        rep: Vec::new(),
        def: Vec::new(),
        max_rep: layout.max_rep,
        max_def: layout.max_def,
        values: layout.codec.shape.empty_values(),
    };
    let mut pos = 0usize;
    let corrupt = |pos: usize, msg: &str| Error::corrupt(base + pos as u64, msg.to_string());
    while pos < bytes.len() {
        if bytes.len() - pos < cw {
            return Err(corrupt(pos, "truncated control word"));
        }
        let mut word = [0u8; 4];
        word[..cw].copy_from_slice(&bytes[pos..pos + cw]);
        let (rep, def) = control.decode(u32::from_le_bytes(word));
        if rep > layout.max_rep || def > layout.max_def {
            return Err(corrupt(pos, "control word levels out of range"));
        }
        let record_start = pos;
        pos += cw;
        if def == 0 {
            let len = match value_width {
                Some(w) => w,
                None => {
                    let lw = layout.length_width as usize;
                    if bytes.len() - pos < lw {
                        return Err(corrupt(pos, "truncated length prefix"));
                    }
                    let len = bitpack::read_uint(&bytes[pos..pos + lw], lw as u8) as usize;
                    pos += lw;
                    len
                }
            };
            if bytes.len() - pos < len {
                return Err(corrupt(record_start, "record extends past end of buffer"));
            }
            let value = layout
                .codec
                .decode_value(&bytes[pos..pos + len])
                .map_err(|e| match e {
                    Error::Corrupt { message, .. } => corrupt(pos, &message),
                    other => other,
                })?;
            levels.values.push(&value);
            pos += len;
        } else if let Some(w) = value_width {
            if bytes.len() - pos < w {
                return Err(corrupt(pos, "truncated filler"));
            }
            pos += w;
        }
        levels.push(rep, def);
    }
    Ok(levels)
}

/// Decodes a whole page. The repetition index is not read.
pub fn decode_full_zip_scan(layout: &FullZipLayout, zipped: &[u8]) -> Result<RepDefLevels> {
    let levels = unzip(layout, zipped, 0)?;
    if levels.num_rows() as u64 != layout.row_count {
        return Err(Error::corrupt(
            zipped.len() as u64,
            format!("page holds {} rows, metadata says {}", levels.num_rows(), layout.row_count),
        ));
    }
    Ok(levels)
}

/// Reads needed to fetch rows `[start, end)` of a page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowLocation {
    /// Byte range within the zipped buffer; no index consulted.
    Direct(Range<u64>),
    /// Byte range within the repetition index holding entries `start` and
    /// `end`; resolve with [`data_range_from_index`].
    Indexed(Range<u64>),
}

/// Plans the first read for rows `[start, end)`.
pub fn locate_rows(layout: &FullZipLayout, rows: Range<u64>) -> Result<RowLocation> {
    if rows.start > rows.end || rows.end > layout.row_count {
        return Err(Error::OutOfRange { index: rows.end, len: layout.row_count });
    }
    if let Some(w) = layout.fixed_record_width {
        return Ok(RowLocation::Direct(rows.start * w..rows.end * w));
    }
    let w = layout.index_width as u64;
    Ok(RowLocation::Indexed(rows.start * w..(rows.end + 1) * w))
}

/// Turns the index bytes fetched for an [`RowLocation::Indexed`] plan into
/// the zipped byte range of the rows.
pub fn data_range_from_index(layout: &FullZipLayout, index_bytes: &[u8], row_span: u64) -> Result<Range<u64>> {
    let w = layout.index_width as usize;
    let expected = (row_span as usize + 1) * w;
    if w == 0 || index_bytes.len() != expected {
        return Err(Error::corrupt(0, format!("expected {expected} rep-index bytes, got {}", index_bytes.len())));
    }
    let start = bitpack::read_uint(&index_bytes[..w], w as u8);
    let end = bitpack::read_uint(&index_bytes[expected - w..], w as u8);
    if end < start {
        return Err(Error::corrupt(0, "rep index is not monotone"));
    }
    Ok(start..end)
}

/// Decodes the records of exactly `expected_rows` rows read from a page.
pub fn decode_rows(layout: &FullZipLayout, bytes: &[u8], expected_rows: u64, base: u64) -> Result<RepDefLevels> {
    let levels = unzip(layout, bytes, base)?;
    let rows = levels.num_rows() as u64;
    let starts_cleanly = levels.rep.first().is_none_or(|r| *r == layout.max_rep);
    if rows != expected_rows || !starts_cleanly {
        return Err(Error::corrupt(
            base,
            format!("expected {expected_rows} rows, decoded {rows}"),
        ));
    }
    Ok(levels)
}

/// Size of the zipped buffer computed from the levels alone.
pub fn zipped_size(levels: &RepDefLevels, codec: &Codec) -> Result<u64> {
    let page = encode_full_zip(levels, codec)?;
    Ok(page.zipped.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{DataType, Field, LogicalArray, Value};
    use crate::codecs::{CodecRequest, LeafShape};
    use crate::repdef::{shred, unshred};

    fn example_field() -> Field {
        Field::new(
            "s",
            DataType::Struct(vec![Field::new("l", DataType::list(DataType::Utf8, true), true)]),
            true,
        )
    }

    fn example_array() -> LogicalArray {
        let s = |v: &str| Value::from(v);
        let rows = vec![
            Value::Struct(vec![Value::List(vec![s("AB"), s("C")])]),
            Value::Struct(vec![Value::Null]),
            Value::Null,
            Value::Struct(vec![Value::List(vec![Value::Null])]),
            Value::Struct(vec![Value::List(vec![])]),
        ];
        LogicalArray::from_values(&example_field().data_type, &rows).unwrap()
    }

    fn example_page() -> FullZipPage {
        let levels = shred(&example_field(), &example_array()).unwrap().remove(0);
        encode_full_zip(&levels, &Codec::passthrough(LeafShape::Variable)).unwrap()
    }

    /// Walks the zipped stream record by record, independent of the encoder.
    fn brute_force_row_offsets(page: &FullZipPage) -> Vec<u64> {
        let (max_rep, def_bits) = (page.layout.max_rep as u8, page.layout.control.def_bits);
        let mut offsets = Vec::new();
        let mut pos = 0;
        while pos < page.zipped.len() {
            let word = page.zipped[pos];
            let rep = word >> def_bits;
            let def = word & ((1 << def_bits) - 1);
            if rep == max_rep {
                offsets.push(pos as u64);
            }
            pos += 1;
            if def == 0 {
                pos += 1 + page.zipped[pos] as usize;
            }
        }
        offsets.push(pos as u64);
        offsets
    }

    #[test]
    fn example_byte_stream() {
        let page = example_page();
        assert_eq!(page.layout.control.width_bytes, 1);
        assert_eq!(
            page.zipped,
            vec![0x08, 2, b'A', b'B', 0x00, 1, b'C', 0x0B, 0x0C, 0x09, 0x0A]
        );
    }

    #[test]
    fn example_rep_index() {
        let page = example_page();
        assert_eq!(page.row_count(), 5);
        assert_eq!(page.layout.index_width, 1);
        assert_eq!(page.rep_index_entries(), vec![0, 7, 8, 9, 10, 11]);
        assert_eq!(page.rep_index_entries(), brute_force_row_offsets(&page));
    }

    #[test]
    fn example_round_trip() {
        let page = example_page();
        let levels = decode_full_zip_scan(&page.layout, &page.zipped).unwrap();
        let back = unshred(&example_field(), &[levels]).unwrap();
        assert_eq!(back, example_array());
    }

    fn read_rows(page: &FullZipPage, rows: Range<u64>) -> (usize, RepDefLevels) {
        let mut iops = 1;
        let range = match locate_rows(&page.layout, rows.clone()).unwrap() {
            RowLocation::Direct(r) => r,
            RowLocation::Indexed(ix) => {
                iops += 1;
                let bytes = &page.rep_index[ix.start as usize..ix.end as usize];
                data_range_from_index(&page.layout, bytes, rows.end - rows.start).unwrap()
            }
        };
        let bytes = &page.zipped[range.start as usize..range.end as usize];
        (iops, decode_rows(&page.layout, bytes, rows.end - rows.start, range.start).unwrap())
    }

    #[test]
    fn example_random_access() {
        let page = example_page();
        let field = example_field();
        let match_row = |row: u64, expected: Value| {
            let (iops, levels) = read_rows(&page, row..row + 1);
            assert_eq!(iops, 2);
            let arr = unshred(&field, &[levels]).unwrap();
            assert_eq!(arr.value(0), expected);
        };
        match_row(0, Value::Struct(vec![Value::List(vec![Value::from("AB"), Value::from("C")])]));
        match_row(1, Value::Struct(vec![Value::Null]));
        match_row(4, Value::Struct(vec![Value::List(vec![])]));
        assert_eq!(
            locate_rows(&page.layout, 1..2).unwrap(),
            RowLocation::Indexed(1..3)
        );
        let ix = &page.rep_index[1..3];
        assert_eq!(data_range_from_index(&page.layout, ix, 1).unwrap(), 7..8);
        let RowLocation::Indexed(ix) = locate_rows(&page.layout, 0..5).unwrap() else { panic!() };
        let ix = &page.rep_index[ix.start as usize..ix.end as usize];
        assert_eq!(data_range_from_index(&page.layout, ix, 5).unwrap(), 0..11);
    }

    #[test]
    fn fixed_width_non_null() {
        let field = Field::new("x", DataType::UInt64, false);
        let arr = LogicalArray::from_values(&DataType::UInt64, &[Value::UInt(7), Value::UInt(8)]).unwrap();
        let levels = shred(&field, &arr).unwrap().remove(0);
        let page = encode_full_zip(&levels, &Codec::passthrough(LeafShape::Fixed(8))).unwrap();
        assert_eq!(page.layout.fixed_record_width, Some(9));
        assert!(page.rep_index.is_empty());
        assert_eq!(page.zipped.len(), 18);
        assert_eq!(page.zipped[0], 0);
        assert_eq!(locate_rows(&page.layout, 3..5).ok(), None);
        let (iops, levels) = read_rows(&page, 1..2);
        assert_eq!(iops, 1);
        assert_eq!(levels.values.get(0), 8u64.to_le_bytes());
    }

    #[test]
    fn fixed_width_locate_arithmetic() {
        let mut layout = example_page().layout;
        layout.fixed_record_width = Some(9);
        layout.row_count = 10;
        assert_eq!(locate_rows(&layout, 3..5).unwrap(), RowLocation::Direct(27..45));
        assert!(locate_rows(&layout, 3..11).is_err());
    }

    #[test]
    fn fixed_width_null_filler() {
        let field = Field::new("x", DataType::UInt32, true);
        let arr = LogicalArray::from_values(&DataType::UInt32, &[Value::Null, Value::UInt(5)]).unwrap();
        let levels = shred(&field, &arr).unwrap().remove(0);
        let page = encode_full_zip(&levels, &Codec::passthrough(LeafShape::Fixed(4))).unwrap();
        assert_eq!(page.zipped, vec![1, 0, 0, 0, 0, 0, 5, 0, 0, 0]);
        let back = decode_full_zip_scan(&page.layout, &page.zipped).unwrap();
        assert_eq!(unshred(&field, &[back]).unwrap(), arr);
    }

    #[test]
    fn empty_page() {
        let field = Field::new("x", DataType::Utf8, true);
        let arr = LogicalArray::new_empty(&DataType::Utf8);
        let levels = shred(&field, &arr).unwrap().remove(0);
        let page = encode_full_zip(&levels, &Codec::passthrough(LeafShape::Variable)).unwrap();
        assert!(page.zipped.is_empty());
        assert_eq!(page.rep_index_entries(), vec![0]);
        let back = decode_full_zip_scan(&page.layout, &page.zipped).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn opaque_codec_rejected() {
        let vals = crate::array::LeafValues::new_variable();
        let codec = Codec::resolve(CodecRequest::ChunkedBlock(crate::codecs::BlockAlgorithm::Identity), &vals).unwrap();
        let field = Field::new("x", DataType::Utf8, true);
        let levels = shred(&field, &LogicalArray::new_empty(&DataType::Utf8)).unwrap().remove(0);
        assert!(matches!(encode_full_zip(&levels, &codec), Err(Error::IllegalCodec(_))));
    }

    #[test]
    fn control_word_layout() {
        let spec = ControlWordSpec::new(LevelWidths { rep_bits: 1, def_bits: 3 }).unwrap();
        assert_eq!(spec.width_bytes, 1);
        assert_eq!(spec.encode(1, 4), 0b1100);
        assert_eq!(spec.decode(0b1100), (1, 4));
        let wide = ControlWordSpec::new(LevelWidths { rep_bits: 5, def_bits: 6 }).unwrap();
        assert_eq!(wide.width_bytes, 2);
        let none = ControlWordSpec::new(LevelWidths { rep_bits: 0, def_bits: 0 }).unwrap();
        assert_eq!(none.width_bytes, 1);
        assert!(matches!(
            ControlWordSpec::new(LevelWidths { rep_bits: 16, def_bits: 17 }),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn truncated_stream_is_corrupt() {
        let page = example_page();
        let err = decode_full_zip_scan(&page.layout, &page.zipped[..3]).unwrap_err();
        assert!(matches!(err, Error::Corrupt { offset: 0, .. }), "{err:?}");
    }

    #[test]
    fn decode_rows_checks_row_count() {
        let page = example_page();
        assert!(decode_rows(&page.layout, &page.zipped[..7], 2, 0).is_err());
        assert!(decode_rows(&page.layout, &page.zipped[4..7], 1, 4).is_err());
    }

    #[test]
    fn bitpacked_values_are_zipped_per_value() {
        let field = Field::new("x", DataType::UInt64, false);
        let vals: Vec<Value> = (0..20).map(|i| Value::UInt(i * 100)).collect();
        let arr = LogicalArray::from_values(&DataType::UInt64, &vals).unwrap();
        let levels = shred(&field, &arr).unwrap().remove(0);
        let codec = Codec::resolve(CodecRequest::BitPack, &levels.values).unwrap();
        let page = encode_full_zip(&levels, &codec).unwrap();
        assert_eq!(page.layout.fixed_record_width, Some(1 + 2));
        let back = decode_full_zip_scan(&page.layout, &page.zipped).unwrap();
        assert_eq!(back, levels);
    }
}
