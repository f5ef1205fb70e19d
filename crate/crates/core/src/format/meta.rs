// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Column metadata block and footer.
//!
//! The metadata block is a `u32` column count followed by one
//! tag-length-value record per column. Inside a column record, each page is
//! again a TLV record whose tag is the page's structural encoding. See
//! `docs/FORMAT.md` for the full grammar.

use crate::array::{Field, LeafValues};
use crate::arrow::{ArrowLayout, ArrowNode, Extent};
use crate::codecs::{dictionary, Codec, CodecDescriptor, LeafShape};
use crate::format::packed::{PackedField, PackedLayout};
use crate::format::schema::{read_field, write_field};
use crate::fullzip::{ControlWordSpec, FullZipLayout};
use crate::miniblock::MiniBlockLayout;
use crate::wire::{Reader, Writer};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ZCF1";
pub const HEADER_LEN: u64 = 8;
pub const FOOTER_LEN: u64 = 36;
pub const VERSION_MAJOR: u16 = 1;
pub const VERSION_MINOR: u16 = 0;

pub const TAG_COLUMN: u8 = 0x10;
pub const TAG_ARROW: u8 = 0;
pub const TAG_FULL_ZIP: u8 = 1;
pub const TAG_MINIBLOCK: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Footer {
    pub meta_offset: u64,
    pub meta_len: u64,
    pub column_count: u32,
    pub row_count: u64,
    pub version: (u16, u16),
}

impl Footer {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.meta_offset);
        w.u64(self.meta_len);
        w.u32(self.column_count);
        w.u64(self.row_count);
        w.u16(self.version.0);
        w.u16(self.version.1);
        w.bytes(MAGIC);
        w.finish()
    }

    /// Parses the last [`FOOTER_LEN`] bytes of a file of `file_len` bytes.
    pub fn parse(bytes: &[u8], file_len: u64) -> Result<Self> {
        let base = file_len.saturating_sub(FOOTER_LEN);
        if bytes.len() as u64 != FOOTER_LEN {
            return Err(Error::corrupt(base, "file too short for footer"));
        }
        let mut r = Reader::with_base(bytes, base);
        let footer = Footer {
            meta_offset: r.u64()?,
            meta_len: r.u64()?,
            column_count: r.u32()?,
            row_count: r.u64()?,
            version: (r.u16()?, r.u16()?),
        };
        if r.take(4)? != MAGIC {
            return Err(Error::corrupt(file_len - 4, "bad magic"));
        }
        if footer.version.0 != VERSION_MAJOR {
            return Err(Error::Unsupported(format!(
                "format version {}.{} (reader supports {VERSION_MAJOR}.x)",
                footer.version.0, footer.version.1
            )));
        }
        let end = footer.meta_offset.checked_add(footer.meta_len);
        if footer.meta_offset < HEADER_LEN || end.is_none_or(|e| e > base) {
            return Err(Error::corrupt(base, "metadata block out of bounds"));
        }
        Ok(footer)
    }
}

#[derive(Debug, Clone)]
pub enum PageLayout {
    FullZip {
        layout: FullZipLayout,
        rep_index: Extent,
        data: Extent,
    },
    MiniBlock {
        layout: MiniBlockLayout,
        chunk_count: u32,
        /// Chunk words followed by the per-chunk repetition index.
        cache: Extent,
        data: Extent,
    },
}

impl PageLayout {
    pub fn tag(&self) -> u8 {
        match self {
            PageLayout::FullZip { .. } => TAG_FULL_ZIP,
            PageLayout::MiniBlock { .. } => TAG_MINIBLOCK,
        }
    }

    pub fn codec(&self) -> &Codec {
        match self {
            PageLayout::FullZip { layout, .. } => &layout.codec,
            PageLayout::MiniBlock { layout, .. } => &layout.codec,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PageMeta {
    pub row_start: u64,
    pub row_count: u64,
    pub layout: PageLayout,
}

impl PageMeta {
    pub fn rows(&self) -> std::ops::Range<u64> {
        self.row_start..self.row_start + self.row_count
    }
}

#[derive(Debug, Clone, Default)]
pub struct LeafColumn {
    pub pages: Vec<PageMeta>,
}

#[derive(Debug, Clone)]
pub enum ColumnStorage {
    /// One leaf column per leaf of the schema.
    Shredded(Vec<LeafColumn>),
    /// The whole struct in one leaf column.
    Packed { layout: PackedLayout, leaf: LeafColumn },
    /// Arrow-style baseline buffers.
    Arrow(ArrowLayout),
}

#[derive(Debug, Clone)]
pub struct ColumnMeta {
    pub field: Field,
    pub storage: ColumnStorage,
}

fn write_extent(e: &Extent, w: &mut Writer) {
    w.u64(e.offset);
    w.u64(e.length);
}

fn read_extent(r: &mut Reader<'_>, limit: u64) -> Result<Extent> {
    let e = Extent { offset: r.u64()?, length: r.u64()? };
    if e.offset.checked_add(e.length).is_none_or(|end| end > limit) {
        return Err(r.error("extent out of bounds"));
    }
    Ok(e)
}

pub fn write_codec(codec: &Codec, w: &mut Writer) {
    codec.descriptor.write_to(w);
    match codec.shape {
        LeafShape::Variable => w.u8(0),
        LeafShape::Fixed(width) => {
            w.u8(1);
            w.u32(width as u32);
        }
    }
    match &codec.dictionary {
        Some(d) => {
            w.u8(1);
            dictionary::write_leaf_values(d, w);
        }
        None => w.u8(0),
    }
}

pub fn read_codec(r: &mut Reader<'_>) -> Result<Codec> {
    let descriptor = CodecDescriptor::read_from(r)?;
    let shape = match r.u8()? {
        0 => LeafShape::Variable,
        1 => LeafShape::Fixed(r.u32()? as usize),
        _ => return Err(r.error("bad leaf shape")),
    };
    let dictionary: Option<LeafValues> = match r.u8()? {
        0 => None,
        1 => Some(dictionary::read_leaf_values(r)?),
        _ => return Err(r.error("bad dictionary flag")),
    };
    if matches!(descriptor, CodecDescriptor::Dictionary { .. }) != dictionary.is_some() {
        return Err(r.error("dictionary presence does not match codec"));
    }
    Ok(Codec::from_descriptor(descriptor, shape, dictionary))
}

fn write_page(p: &PageMeta, w: &mut Writer) {
    let mut body = Writer::new();
    body.u64(p.row_start);
    body.u64(p.row_count);
    match &p.layout {
        PageLayout::FullZip { layout, rep_index, data } => {
            body.u8(layout.control.width_bytes);
            body.u8(layout.control.rep_bits);
            body.u8(layout.control.def_bits);
            body.u16(layout.max_rep);
            body.u16(layout.max_def);
            body.u8(layout.length_width);
            body.u64(layout.fixed_record_width.unwrap_or(0));
            body.u8(layout.index_width);
            write_extent(rep_index, &mut body);
            write_extent(data, &mut body);
            write_codec(&layout.codec, &mut body);
        }
        PageLayout::MiniBlock { layout, chunk_count, cache, data } => {
            body.u64(layout.value_count);
            body.u16(layout.max_rep);
            body.u16(layout.max_def);
            body.u32(*chunk_count);
            write_extent(cache, &mut body);
            write_extent(data, &mut body);
            write_codec(&layout.codec, &mut body);
        }
    }
    w.u8(p.layout.tag());
    w.blob(&body.finish());
}

fn read_page(r: &mut Reader<'_>, limit: u64) -> Result<PageMeta> {
    let tag = r.u8()?;
    let at = r.offset() + 4;
    let body = r.blob()?;
    let mut b = Reader::with_base(body, at);
    let row_start = b.u64()?;
    let row_count = b.u64()?;
    let layout = match tag {
        TAG_FULL_ZIP => {
            let width_bytes = b.u8()?;
            let rep_bits = b.u8()?;
            let def_bits = b.u8()?;
            let control = ControlWordSpec::new(crate::repdef::LevelWidths { rep_bits, def_bits })?;
            if control.width_bytes != width_bytes {
                return Err(b.error("control word width does not match level widths"));
            }
            let max_rep = b.u16()?;
            let max_def = b.u16()?;
            let length_width = b.u8()?;
            let fixed = b.u64()?;
            let index_width = b.u8()?;
            let rep_index = read_extent(&mut b, limit)?;
            let data = read_extent(&mut b, limit)?;
            let codec = read_codec(&mut b)?;
            codec.require_transparent()?;
            if length_width > 8 || index_width > 8 || (fixed == 0 && index_width == 0) {
                return Err(b.error("bad full-zip widths"));
            }
            PageLayout::FullZip {
                layout: FullZipLayout {
                    control,
                    max_rep,
                    max_def,
                    codec,
                    length_width,
                    fixed_record_width: (fixed != 0).then_some(fixed),
                    index_width,
                    row_count,
                },
                rep_index,
                data,
            }
        }
        TAG_MINIBLOCK => {
            let value_count = b.u64()?;
            let max_rep = b.u16()?;
            let max_def = b.u16()?;
            let chunk_count = b.u32()?;
            let cache = read_extent(&mut b, limit)?;
            let data = read_extent(&mut b, limit)?;
            let codec = read_codec(&mut b)?;
            PageLayout::MiniBlock {
                layout: MiniBlockLayout { max_rep, max_def, codec, value_count, row_count },
                chunk_count,
                cache,
                data,
            }
        }
        t => return Err(r.error(format!("unknown page encoding tag {t}"))),
    };
    if !b.is_done() {
        return Err(b.error("trailing bytes in page record"));
    }
    Ok(PageMeta { row_start, row_count, layout })
}

fn write_leaf(leaf: &LeafColumn, w: &mut Writer) {
    w.u32(leaf.pages.len() as u32);
    for p in &leaf.pages {
        write_page(p, w);
    }
}

fn read_leaf(r: &mut Reader<'_>, limit: u64) -> Result<LeafColumn> {
    let n = r.u32()? as usize;
    let mut pages = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        pages.push(read_page(r, limit)?);
    }
    Ok(LeafColumn { pages })
}

pub fn write_metadata(columns: &[ColumnMeta]) -> Vec<u8> {
    let mut w = Writer::new();
    w.u32(columns.len() as u32);
    for c in columns {
        let mut body = Writer::new();
        write_field(&c.field, &mut body);
        match &c.storage {
            ColumnStorage::Shredded(leaves) => {
                body.u8(0);
                body.u16(leaves.len() as u16);
                for l in leaves {
                    write_leaf(l, &mut body);
                }
            }
            ColumnStorage::Packed { layout, leaf } => {
                body.u8(1);
                body.u8(layout.has_bitmap as u8);
                body.u16(layout.fields.len() as u16);
                for f in &layout.fields {
                    write_codec(&f.codec, &mut body);
                    body.u8(f.length_width);
                }
                write_leaf(leaf, &mut body);
            }
            ColumnStorage::Arrow(layout) => {
                body.u8(2);
                body.u64(layout.len);
                layout.root.write_to(&mut body);
            }
        }
        w.u8(TAG_COLUMN);
        w.blob(&body.finish());
    }
    w.finish()
}

/// Parses a metadata block located at `base`; extents must end before `limit`.
pub fn read_metadata(bytes: &[u8], base: u64, limit: u64) -> Result<Vec<ColumnMeta>> {
    let mut r = Reader::with_base(bytes, base);
    let n = r.u32()? as usize;
    let mut columns = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let tag = r.u8()?;
        if tag != TAG_COLUMN {
            return Err(r.error(format!("expected column record, found tag {tag}")));
        }
        let at = r.offset() + 4;
        let body = r.blob()?;
        let mut b = Reader::with_base(body, at);
        let field = read_field(&mut b)?;
        let storage = match b.u8()? {
            0 => {
                let leaves = b.u16()? as usize;
                if leaves != field.data_type.leaf_count() {
                    return Err(b.error("leaf count does not match schema"));
                }
                ColumnStorage::Shredded((0..leaves).map(|_| read_leaf(&mut b, limit)).collect::<Result<_>>()?)
            }
            1 => {
                let has_bitmap = b.u8()? != 0;
                let count = b.u16()? as usize;
                let mut fields = Vec::with_capacity(count);
                for _ in 0..count {
                    let codec = read_codec(&mut b)?;
                    let length_width = b.u8()?;
                    fields.push(PackedField { codec, length_width });
                }
                let leaf = read_leaf(&mut b, limit)?;
                ColumnStorage::Packed { layout: PackedLayout { fields, has_bitmap }, leaf }
            }
            2 => {
                let len = b.u64()?;
                let root = ArrowNode::read_from(&mut b)?;
                if root.extents().iter().any(|e| e.offset + e.length > limit) {
                    return Err(b.error("arrow extent out of bounds"));
                }
                ColumnStorage::Arrow(ArrowLayout { field: field.clone(), len, root })
            }
            p => return Err(b.error(format!("unknown packing {p}"))),
        };
        if !b.is_done() {
            return Err(b.error("trailing bytes in column record"));
        }
        columns.push(ColumnMeta { field, storage });
    }
    if !r.is_done() {
        return Err(r.error("trailing bytes in metadata block"));
    }
    Ok(columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn footer_round_trip() {
        let f = Footer { meta_offset: 8, meta_len: 4, column_count: 0, row_count: 0, version: (1, 0) };
        let bytes = f.to_bytes();
        assert_eq!(bytes.len() as u64, FOOTER_LEN);
        assert_eq!(&bytes[32..], MAGIC);
        assert_eq!(Footer::parse(&bytes, 48).unwrap(), f);
    }

    #[test]
    fn footer_rejects_bad_magic_and_version() {
        let f = Footer { meta_offset: 8, meta_len: 4, column_count: 0, row_count: 0, version: (1, 0) };
        let mut bytes = f.to_bytes();
        bytes[35] = b'X';
        assert!(matches!(Footer::parse(&bytes, 48), Err(Error::Corrupt { .. })));
        let newer = Footer { version: (2, 0), ..f };
        assert!(matches!(Footer::parse(&newer.to_bytes(), 48), Err(Error::Unsupported(_))));
        let oob = Footer { meta_len: 100, ..f };
        assert!(Footer::parse(&oob.to_bytes(), 48).is_err());
    }
}
