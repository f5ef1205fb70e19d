// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Compressive encodings for leaf values.
//!
//! Codecs are classified two ways. A *transparent* codec lets a single value
//! be decoded from its own byte extent; an *opaque* codec needs the whole
//! buffer. A *dense* codec gives every value the same number of bytes so the
//! extent of value `i` is `i * width`; a *sparse* one does not.
//!
//! Full-zip only accepts transparent codecs. Miniblock accepts everything,
//! treating each chunk as one compression unit.

pub mod bitpack;
pub mod block;
pub mod dictionary;

use std::borrow::Cow;
use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

pub use block::BlockAlgorithm;

use crate::array::LeafValues;
use crate::repdef::bits_for;
use crate::wire::{Reader, Writer};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transparency {
    Transparent,
    Opaque,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sparsity {
    Sparse,
    Dense,
}

/// Shape of the uncompressed leaf values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LeafShape {
    Fixed(usize),
    Variable,
}

impl LeafShape {
    pub fn of(values: &LeafValues) -> Self {
        match values.fixed_width() {
            Some(w) => LeafShape::Fixed(w),
            None => LeafShape::Variable,
        }
    }

    pub fn empty_values(self) -> LeafValues {
        match self {
            LeafShape::Fixed(w) => LeafValues::new_fixed(w),
            LeafShape::Variable => LeafValues::new_variable(),
        }
    }
}

/// What the caller asks for; parameters are chosen from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CodecRequest {
    #[default]
    Passthrough,
    BitPack,
    ByteAligned,
    Dictionary,
    PerValueBlock(BlockAlgorithm),
    ChunkedBlock(BlockAlgorithm),
}

/// Fully parameterized codec, serialized into column metadata.
///
/// Wire form: one tag byte followed by little-endian parameters.
///
/// | tag | codec          | parameters                         |
/// |-----|----------------|------------------------------------|
/// | 0   | passthrough    | none                               |
/// | 1   | bit-pack       | bit width u8, value width u8       |
/// | 2   | byte-aligned   | byte width u8, value width u8      |
/// | 3   | dictionary     | nested descriptor for the indices  |
/// | 4   | per-value block| algorithm u8                       |
/// | 5   | chunked block  | algorithm u8                       |
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CodecDescriptor {
    Passthrough,
    BitPack { bit_width: u8, value_width: u8 },
    ByteAligned { byte_width: u8, value_width: u8 },
    Dictionary { indices: Box<CodecDescriptor> },
    PerValueBlock(BlockAlgorithm),
    ChunkedBlock(BlockAlgorithm),
}

impl CodecDescriptor {
    pub fn transparency(&self) -> Transparency {
        match self {
            CodecDescriptor::ChunkedBlock(_) => Transparency::Opaque,
            _ => Transparency::Transparent,
        }
    }

    pub fn is_transparent(&self) -> bool {
        self.transparency() == Transparency::Transparent
    }

    /// Fixed per-value byte width when values are zipped one at a time.
    pub fn per_value_width(&self, shape: LeafShape) -> Option<usize> {
        match self {
            CodecDescriptor::Passthrough => match shape {
                LeafShape::Fixed(w) => Some(w),
                LeafShape::Variable => None,
            },
            CodecDescriptor::BitPack { bit_width, .. } => Some((*bit_width as usize).div_ceil(8)),
            CodecDescriptor::ByteAligned { byte_width, .. } => Some(*byte_width as usize),
            CodecDescriptor::Dictionary { indices } => indices.per_value_width(LeafShape::Fixed(4)),
            CodecDescriptor::PerValueBlock(_) | CodecDescriptor::ChunkedBlock(_) => None,
        }
    }

    pub fn sparsity(&self, shape: LeafShape) -> Sparsity {
        if self.per_value_width(shape).is_some() {
            Sparsity::Dense
        } else {
            Sparsity::Sparse
        }
    }

    pub fn write_to(&self, w: &mut Writer) {
        match self {
            CodecDescriptor::Passthrough => w.u8(0),
            CodecDescriptor::BitPack { bit_width, value_width } => {
                w.u8(1);
                w.u8(*bit_width);
                w.u8(*value_width);
            }
            CodecDescriptor::ByteAligned { byte_width, value_width } => {
                w.u8(2);
                w.u8(*byte_width);
                w.u8(*value_width);
            }
            CodecDescriptor::Dictionary { indices } => {
                w.u8(3);
                indices.write_to(w);
            }
            CodecDescriptor::PerValueBlock(a) => {
                w.u8(4);
                w.u8(a.tag());
            }
            CodecDescriptor::ChunkedBlock(a) => {
                w.u8(5);
                w.u8(a.tag());
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_to(&mut w);
        w.finish()
    }

    pub fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        Ok(match r.u8()? {
            0 => CodecDescriptor::Passthrough,
            1 => {
                let bit_width = r.u8()?;
                let value_width = r.u8()?;
                if bit_width > 64 || value_width == 0 || value_width > 8 {
                    return Err(r.error("bad bit-pack parameters"));
                }
                CodecDescriptor::BitPack { bit_width, value_width }
            }
            2 => {
                let byte_width = r.u8()?;
                let value_width = r.u8()?;
                if !(1..=8).contains(&byte_width) || value_width == 0 || value_width > 8 {
                    return Err(r.error("bad byte-aligned parameters"));
                }
                CodecDescriptor::ByteAligned { byte_width, value_width }
            }
            3 => CodecDescriptor::Dictionary {
                indices: Box::new(CodecDescriptor::read_from(r)?),
            },
            4 => CodecDescriptor::PerValueBlock(BlockAlgorithm::from_tag(r.u8()?)?),
            5 => CodecDescriptor::ChunkedBlock(BlockAlgorithm::from_tag(r.u8()?)?),
            other => return Err(r.error(format!("unknown codec tag {other}"))),
        })
    }
}

/// A resolved codec: descriptor, value shape and any auxiliary data.
#[derive(Debug, Clone)]
pub struct Codec {
    pub descriptor: CodecDescriptor,
    pub shape: LeafShape,
    /// Dictionary values, stored in page metadata.
    pub dictionary: Option<Arc<LeafValues>>,
    lookup: Option<Arc<HashMap<Vec<u8>, u32>>>,
}

fn fixed_ints(values: &LeafValues, what: &str) -> Result<(usize, Vec<u64>)> {
    match values {
        LeafValues::Fixed { width, .. } if *width <= 8 => {
            Ok((*width, values.iter().map(bitpack::le_to_u64).collect()))
        }
        _ => Err(Error::IllegalCodec(format!(
            "{what} requires fixed-width values of at most 8 bytes"
        ))),
    }
}

impl Codec {
    pub fn passthrough(shape: LeafShape) -> Self {
        Self::from_descriptor(CodecDescriptor::Passthrough, shape, None)
    }

    /// Rebuilds a codec read back from metadata.
    pub fn from_descriptor(descriptor: CodecDescriptor, shape: LeafShape, dictionary: Option<LeafValues>) -> Self {
        Self {
            descriptor,
            shape,
            dictionary: dictionary.map(Arc::new),
            lookup: None,
        }
    }

    /// Picks parameters for `request` that hold every value in `values`.
    pub fn resolve(request: CodecRequest, values: &LeafValues) -> Result<Self> {
        let shape = LeafShape::of(values);
        let descriptor = match request {
            CodecRequest::Passthrough => CodecDescriptor::Passthrough,
            CodecRequest::BitPack => {
                let (w, ints) = fixed_ints(values, "bit packing")?;
                let max = ints.iter().copied().max().unwrap_or(0);
                CodecDescriptor::BitPack { bit_width: bits_for(max), value_width: w as u8 }
            }
            CodecRequest::ByteAligned => {
                let (w, ints) = fixed_ints(values, "byte-aligned packing")?;
                let max = ints.iter().copied().max().unwrap_or(0);
                CodecDescriptor::ByteAligned {
                    byte_width: bitpack::byte_width_for(max),
                    value_width: w as u8,
                }
            }
            CodecRequest::Dictionary => {
                let (dict, lookup, _) = dictionary::build(values);
                let max_index = dict.len().saturating_sub(1) as u64;
                return Ok(Self {
                    descriptor: CodecDescriptor::Dictionary {
                        indices: Box::new(CodecDescriptor::BitPack {
                            bit_width: bits_for(max_index),
                            value_width: 4,
                        }),
                    },
                    shape,
                    dictionary: Some(Arc::new(dict)),
                    lookup: Some(Arc::new(lookup)),
                });
            }
            CodecRequest::PerValueBlock(a) => {
                a.compress(&[], &mut Vec::new())?;
                CodecDescriptor::PerValueBlock(a)
            }
            CodecRequest::ChunkedBlock(a) => {
                a.compress(&[], &mut Vec::new())?;
                CodecDescriptor::ChunkedBlock(a)
            }
        };
        Ok(Self::from_descriptor(descriptor, shape, None))
    }

    pub fn require_transparent(&self) -> Result<()> {
        if self.descriptor.is_transparent() {
            Ok(())
        } else {
            Err(Error::IllegalCodec(format!(
                "{:?} is opaque and cannot be used where single values must decode independently",
                self.descriptor
            )))
        }
    }

    pub fn per_value_width(&self) -> Option<usize> {
        self.descriptor.per_value_width(self.shape)
    }

    fn check_shape(&self, values: &LeafValues) -> Result<()> {
        if LeafShape::of(values) != self.shape {
            return Err(Error::invalid(format!(
                "codec resolved for {:?} values, got {:?}",
                self.shape,
                LeafShape::of(values)
            )));
        }
        Ok(())
    }

    fn dictionary(&self) -> Result<&LeafValues> {
        self.dictionary
            .as_deref()
            .ok_or_else(|| Error::corrupt(0, "dictionary codec without dictionary"))
    }

    pub fn encode(&self, values: &LeafValues) -> Result<CompressedBuffer> {
        self.check_shape(values)?;
        let mut extents = None;
        let bytes = match &self.descriptor {
            CodecDescriptor::Passthrough => {
                if let LeafValues::Variable { offsets, .. } = values {
                    extents = Some(offsets.clone());
                }
                match values {
                    LeafValues::Fixed { data, .. } | LeafValues::Variable { data, .. } => data.clone(),
                }
            }
            CodecDescriptor::BitPack { bit_width, .. } => {
                let (_, ints) = fixed_ints(values, "bit packing")?;
                if let Some(bad) = ints.iter().find(|v| bits_for(**v) > *bit_width) {
                    return Err(Error::invalid(format!("value {bad} exceeds {bit_width} bits")));
                }
                let mut out = Vec::with_capacity(bitpack::packed_len(ints.len(), *bit_width));
                bitpack::pack(ints, *bit_width, &mut out);
                out
            }
            CodecDescriptor::ByteAligned { byte_width, .. } => {
                let (_, ints) = fixed_ints(values, "byte-aligned packing")?;
                let mut out = Vec::with_capacity(ints.len() * *byte_width as usize);
                for v in ints {
                    if bitpack::byte_width_for(v) > *byte_width {
                        return Err(Error::invalid(format!("value {v} exceeds {byte_width} bytes")));
                    }
                    bitpack::write_uint(v, *byte_width, &mut out);
                }
                out
            }
            CodecDescriptor::Dictionary { indices } => {
                let lookup = match &self.lookup {
                    Some(l) => l.clone(),
                    None => {
                        let dict = self.dictionary()?;
                        Arc::new(dict.iter().enumerate().map(|(i, v)| (v.to_vec(), i as u32)).collect())
                    }
                };
                let mut idx = LeafValues::new_fixed(4);
                for v in values.iter() {
                    let i = lookup
                        .get(v)
                        .ok_or_else(|| Error::invalid("value missing from dictionary"))?;
                    idx.push(&i.to_le_bytes());
                }
                let index_codec = Codec::from_descriptor((**indices).clone(), LeafShape::Fixed(4), None);
                index_codec.encode(&idx)?.bytes
            }
            CodecDescriptor::PerValueBlock(a) => {
                let mut out = Vec::new();
                let mut offs = Vec::with_capacity(values.len() + 1);
                offs.push(0u64);
                for v in values.iter() {
                    a.compress(v, &mut out)?;
                    offs.push(out.len() as u64);
                }
                extents = Some(offs);
                out
            }
            CodecDescriptor::ChunkedBlock(a) => {
                let mut raw = Vec::new();
                if let LeafValues::Variable { offsets, data } = values {
                    raw.extend_from_slice(&(values.len() as u32).to_le_bytes());
                    for w in offsets.windows(2) {
                        raw.extend_from_slice(&((w[1] - w[0]) as u32).to_le_bytes());
                    }
                    raw.extend_from_slice(data);
                } else if let LeafValues::Fixed { data, .. } = values {
                    raw.extend_from_slice(data);
                }
                let mut out = Vec::new();
                a.compress(&raw, &mut out)?;
                out
            }
        };
        Ok(CompressedBuffer {
            codec: self.clone(),
            value_count: values.len(),
            bytes,
            extents,
        })
    }

    /// Inverse of [`CompressedBuffer::value_bytes`].
    pub fn decode_value(&self, bytes: &[u8]) -> Result<Vec<u8>> {
        let out = match &self.descriptor {
            CodecDescriptor::Passthrough => bytes.to_vec(),
            CodecDescriptor::BitPack { bit_width, value_width } => {
                let n = (*bit_width as usize).div_ceil(8);
                if bytes.len() != n {
                    return Err(Error::corrupt(0, format!("bit-packed value has {} bytes, expected {n}", bytes.len())));
                }
                let v = if n == 0 { 0 } else { bitpack::read_uint(bytes, n as u8) };
                v.to_le_bytes()[..*value_width as usize].to_vec()
            }
            CodecDescriptor::ByteAligned { byte_width, value_width } => {
                if bytes.len() != *byte_width as usize {
                    return Err(Error::corrupt(0, "byte-aligned value has wrong width"));
                }
                bitpack::read_uint(bytes, *byte_width).to_le_bytes()[..*value_width as usize].to_vec()
            }
            CodecDescriptor::Dictionary { indices } => {
                let index_codec = Codec::from_descriptor((**indices).clone(), LeafShape::Fixed(4), None);
                let raw = index_codec.decode_value(bytes)?;
                let idx = bitpack::le_to_u64(&raw) as usize;
                let dict = self.dictionary()?;
                if idx >= dict.len() {
                    return Err(Error::corrupt(0, format!("dictionary index {idx} out of range")));
                }
                dict.get(idx).to_vec()
            }
            CodecDescriptor::PerValueBlock(a) => {
                let mut out = Vec::new();
                a.decompress(bytes, &mut out)?;
                out
            }
            CodecDescriptor::ChunkedBlock(_) => {
                return Err(Error::Unsupported("single-value decode of an opaque codec".into()))
            }
        };
        if let LeafShape::Fixed(w) = self.shape {
            if out.len() != w {
                return Err(Error::corrupt(0, format!("decoded value has {} bytes, expected {w}", out.len())));
            }
        }
        Ok(out)
    }

    /// Splits an encoded buffer into the data buffers stored in a miniblock
    /// chunk. Variable-size encodings get a leading buffer of byte-aligned
    /// lengths whose width is `buffer size / value count`.
    pub fn chunk_buffers(&self, buf: CompressedBuffer) -> Vec<Vec<u8>> {
        match buf.extents {
            Some(offsets) => {
                let max = offsets.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
                let width = bitpack::byte_width_for(max);
                let mut lengths = Vec::with_capacity(buf.value_count * width as usize);
                for w in offsets.windows(2) {
                    bitpack::write_uint(w[1] - w[0], width, &mut lengths);
                }
                vec![lengths, buf.bytes]
            }
            None => vec![buf.bytes],
        }
    }

    /// Number of data buffers this codec stores per chunk.
    pub fn chunk_buffer_count(&self) -> usize {
        match (&self.descriptor, self.shape) {
            (CodecDescriptor::Passthrough, LeafShape::Variable) | (CodecDescriptor::PerValueBlock(_), _) => 2,
            _ => 1,
        }
    }

    /// Inverse of [`Self::chunk_buffers`] followed by a full decode.
    pub fn decode_chunk_buffers(&self, buffers: &[&[u8]], value_count: usize) -> Result<LeafValues> {
        if buffers.len() != self.chunk_buffer_count() {
            return Err(Error::corrupt(0, format!(
                "expected {} data buffers, found {}",
                self.chunk_buffer_count(),
                buffers.len()
            )));
        }
        let extents = if buffers.len() == 2 {
            let lengths = buffers[0];
            let mut offsets = Vec::with_capacity(value_count + 1);
            offsets.push(0u64);
            if value_count > 0 {
                if !lengths.len().is_multiple_of(value_count) || lengths.len() / value_count > 8 || lengths.is_empty() {
                    return Err(Error::corrupt(0, "length buffer size does not match value count"));
                }
                let width = (lengths.len() / value_count) as u8;
                for chunk in lengths.chunks_exact(width as usize) {
                    offsets.push(offsets.last().unwrap() + bitpack::read_uint(chunk, width));
                }
            } else if !lengths.is_empty() {
                return Err(Error::corrupt(0, "lengths present for zero values"));
            }
            if *offsets.last().unwrap() as usize != buffers[1].len() {
                return Err(Error::corrupt(0, "lengths do not sum to data size"));
            }
            Some(offsets)
        } else {
            None
        };
        let bytes = buffers[buffers.len() - 1].to_vec();
        CompressedBuffer {
            codec: self.clone(),
            value_count,
            bytes,
            extents,
        }
        .decode()
    }
}

/// Encoded leaf values.
#[derive(Debug, Clone)]
pub struct CompressedBuffer {
    pub codec: Codec,
    pub value_count: usize,
    pub bytes: Vec<u8>,
    /// Byte offsets (`value_count + 1`) of each value for variable-size
    /// transparent encodings.
    pub extents: Option<Vec<u64>>,
}

/// Resolves `request` against `values` and encodes them.
pub fn encode(values: &LeafValues, request: CodecRequest) -> Result<CompressedBuffer> {
    Codec::resolve(request, values)?.encode(values)
}

impl CompressedBuffer {
    pub fn descriptor(&self) -> &CodecDescriptor {
        &self.codec.descriptor
    }

    pub fn transparency(&self) -> Transparency {
        self.codec.descriptor.transparency()
    }

    pub fn decode(&self) -> Result<LeafValues> {
        let codec = &self.codec;
        let n = self.value_count;
        let mut out = codec.shape.empty_values();
        match &codec.descriptor {
            CodecDescriptor::Passthrough => match (codec.shape, &self.extents) {
                (LeafShape::Fixed(w), _) => {
                    if self.bytes.len() != n * w {
                        return Err(Error::corrupt(self.bytes.len() as u64, "fixed-width buffer size mismatch"));
                    }
                    out = LeafValues::Fixed { width: w, data: self.bytes.clone() };
                }
                (LeafShape::Variable, Some(offsets)) => {
                    if offsets.len() != n + 1 || *offsets.last().unwrap() as usize != self.bytes.len() {
                        return Err(Error::corrupt(0, "variable-width extents do not match buffer"));
                    }
                    out = LeafValues::Variable { offsets: offsets.clone(), data: self.bytes.clone() };
                }
                (LeafShape::Variable, None) => return Err(Error::corrupt(0, "variable-width buffer without extents")),
            },
            CodecDescriptor::BitPack { bit_width, value_width } => {
                let ints = bitpack::unpack(&self.bytes, *bit_width, n)?;
                for v in ints {
                    out.push(&v.to_le_bytes()[..*value_width as usize]);
                }
            }
            CodecDescriptor::ByteAligned { byte_width, value_width } => {
                let bw = *byte_width as usize;
                if self.bytes.len() < n * bw {
                    return Err(Error::corrupt(self.bytes.len() as u64, "byte-aligned buffer truncated"));
                }
                for chunk in self.bytes[..n * bw].chunks_exact(bw) {
                    out.push(&bitpack::read_uint(chunk, *byte_width).to_le_bytes()[..*value_width as usize]);
                }
            }
            CodecDescriptor::Dictionary { indices } => {
                let index_codec = Codec::from_descriptor((**indices).clone(), LeafShape::Fixed(4), None);
                let idx = CompressedBuffer {
                    codec: index_codec,
                    value_count: n,
                    bytes: self.bytes.clone(),
                    extents: None,
                }
                .decode()?;
                let dict = codec.dictionary()?;
                for (k, raw) in idx.iter().enumerate() {
                    let i = bitpack::le_to_u64(raw) as usize;
                    if i >= dict.len() {
                        return Err(Error::corrupt(k as u64, format!("dictionary index {i} out of range")));
                    }
                    out.push(dict.get(i));
                }
            }
            CodecDescriptor::PerValueBlock(_) => {
                for i in 0..n {
                    let ext = self.extent(i)?;
                    out.push(&codec.decode_value(&self.bytes[ext])?);
                }
            }
            CodecDescriptor::ChunkedBlock(a) => {
                let mut raw = Vec::new();
                a.decompress(&self.bytes, &mut raw)?;
                match codec.shape {
                    LeafShape::Fixed(w) => {
                        if raw.len() != n * w {
                            return Err(Error::corrupt(0, "chunked block size mismatch"));
                        }
                        out = LeafValues::Fixed { width: w, data: raw };
                    }
                    LeafShape::Variable => {
                        let mut r = Reader::new(&raw);
                        let count = r.u32()? as usize;
                        if count != n {
                            return Err(Error::corrupt(0, "chunked block value count mismatch"));
                        }
                        let mut lens = Vec::with_capacity(n);
                        for _ in 0..n {
                            lens.push(r.u32()? as usize);
                        }
                        for len in lens {
                            out.push(r.take(len)?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Byte extent of value `i` within [`Self::bytes`].
    ///
    /// For sub-byte bit packing the extent is the bytes covering the value's bits.
    pub fn extent(&self, i: usize) -> Result<Range<usize>> {
        if self.transparency() == Transparency::Opaque {
            return Err(Error::Unsupported("opaque codecs have no per-value extents".into()));
        }
        if i >= self.value_count {
            return Err(Error::OutOfRange { index: i as u64, len: self.value_count as u64 });
        }
        if let Some(offsets) = &self.extents {
            return Ok(offsets[i] as usize..offsets[i + 1] as usize);
        }
        let desc = match &self.codec.descriptor {
            CodecDescriptor::Dictionary { indices } => indices.as_ref(),
            desc => desc,
        };
        let shape = match &self.codec.descriptor {
            CodecDescriptor::Dictionary { .. } => LeafShape::Fixed(4),
            _ => self.codec.shape,
        };
        let range = match desc {
            CodecDescriptor::BitPack { bit_width, .. } => {
                let bw = *bit_width as usize;
                (i * bw) / 8..((i + 1) * bw).div_ceil(8)
            }
            desc => {
                let w = desc
                    .per_value_width(shape)
                    .ok_or_else(|| Error::corrupt(0, "variable-width buffer without extents"))?;
                i * w..(i + 1) * w
            }
        };
        if range.end > self.bytes.len() {
            return Err(Error::corrupt(self.bytes.len() as u64, "buffer shorter than value extent"));
        }
        Ok(range)
    }

    /// Standalone encoded form of value `i`, decodable by [`Codec::decode_value`].
    pub fn value_bytes(&self, i: usize) -> Result<Cow<'_, [u8]>> {
        let ext = self.extent(i)?;
        match &self.codec.descriptor {
            CodecDescriptor::BitPack { bit_width, .. } => Ok(repack(&self.bytes, *bit_width, i)),
            CodecDescriptor::Dictionary { indices } => match indices.as_ref() {
                CodecDescriptor::BitPack { bit_width, .. } => Ok(repack(&self.bytes, *bit_width, i)),
                _ => Ok(Cow::Borrowed(&self.bytes[ext])),
            },
            _ => Ok(Cow::Borrowed(&self.bytes[ext])),
        }
    }

    /// Decodes only value `i`.
    pub fn decode_one(&self, i: usize) -> Result<Vec<u8>> {
        if self.transparency() == Transparency::Opaque {
            return Err(Error::Unsupported(
                "opaque codecs must decompress the whole buffer to access a value".into(),
            ));
        }
        let bytes = self.value_bytes(i)?;
        self.codec.decode_value(&bytes)
    }
}

fn repack(bytes: &[u8], bit_width: u8, i: usize) -> Cow<'static, [u8]> {
    let n = (bit_width as usize).div_ceil(8);
    if n == 0 {
        return Cow::Borrowed(&[]);
    }
    let v = bitpack::get(bytes, bit_width, i);
    Cow::Owned(v.to_le_bytes()[..n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u64s(vals: &[u64]) -> LeafValues {
        let mut out = LeafValues::new_fixed(8);
        for v in vals {
            out.push(&v.to_le_bytes());
        }
        out
    }

    fn strings(vals: &[&str]) -> LeafValues {
        let mut out = LeafValues::new_variable();
        for v in vals {
            out.push(v.as_bytes());
        }
        out
    }

    #[test]
    fn bitpack_small_values() {
        let vals: Vec<u64> = (0..1000).map(|i| i % 16).collect();
        let buf = encode(&u64s(&vals), CodecRequest::BitPack).unwrap();
        assert_eq!(buf.descriptor(), &CodecDescriptor::BitPack { bit_width: 4, value_width: 8 });
        assert_eq!(buf.bytes.len(), 500);
        assert_eq!(buf.decode().unwrap(), u64s(&vals));
    }

    #[test]
    fn bitpack_decode_one() {
        let buf = encode(&u64s(&[3, 9, 12]), CodecRequest::BitPack).unwrap();
        assert_eq!(buf.decode_one(1).unwrap(), 9u64.to_le_bytes());
        assert_eq!(buf.extent(1).unwrap(), 0..1);
        let full = buf.decode().unwrap();
        for i in 0..3 {
            assert_eq!(buf.decode_one(i).unwrap(), full.get(i));
        }
    }

    #[test]
    fn truncated_bitpack_is_corrupt() {
        let mut buf = encode(&u64s(&[3, 9, 12, 15]), CodecRequest::BitPack).unwrap();
        buf.bytes.pop();
        assert!(matches!(buf.decode(), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn passthrough_is_identity() {
        let vals = strings(&["ab", "", "cde"]);
        let buf = encode(&vals, CodecRequest::Passthrough).unwrap();
        assert_eq!(buf.bytes, b"abcde");
        assert_eq!(buf.decode().unwrap(), vals);
        let fixed = u64s(&[5, 6]);
        let buf = encode(&fixed, CodecRequest::Passthrough).unwrap();
        assert_eq!(buf.decode_one(0).unwrap(), 5u64.to_le_bytes());
        assert_eq!(buf.descriptor().sparsity(LeafShape::Fixed(8)), Sparsity::Dense);
        assert_eq!(buf.descriptor().sparsity(LeafShape::Variable), Sparsity::Sparse);
    }

    #[test]
    fn dictionary_codec() {
        let vals = strings(&["a", "b", "a", "a"]);
        let buf = encode(&vals, CodecRequest::Dictionary).unwrap();
        assert_eq!(buf.codec.dictionary.as_deref(), Some(&strings(&["a", "b"])));
        assert_eq!(buf.bytes, vec![0b0010]);
        assert_eq!(buf.decode().unwrap(), vals);
        assert_eq!(buf.decode_one(1).unwrap(), b"b");
    }

    #[test]
    fn chunked_block_is_opaque() {
        let vals = strings(&["aaaa", "bb", ""]);
        let buf = encode(&vals, CodecRequest::ChunkedBlock(BlockAlgorithm::RunLength)).unwrap();
        assert_eq!(buf.transparency(), Transparency::Opaque);
        assert_eq!(buf.decode().unwrap(), vals);
        assert!(matches!(buf.decode_one(0), Err(Error::Unsupported(_))));
        assert!(buf.codec.require_transparent().is_err());
    }

    #[test]
    fn per_value_block_is_transparent() {
        let vals = strings(&["aaaaaaaa", "xyz", ""]);
        let buf = encode(&vals, CodecRequest::PerValueBlock(BlockAlgorithm::RunLength)).unwrap();
        assert_eq!(buf.transparency(), Transparency::Transparent);
        assert_eq!(buf.decode_one(0).unwrap(), b"aaaaaaaa");
        assert_eq!(buf.extent(0).unwrap(), 0..2);
        assert_eq!(buf.decode().unwrap(), vals);
    }

    #[test]
    fn reserved_algorithm_rejected() {
        let vals = strings(&["a"]);
        assert!(matches!(
            encode(&vals, CodecRequest::ChunkedBlock(BlockAlgorithm::Zstd)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn bitpack_rejects_variable_values() {
        assert!(matches!(
            encode(&strings(&["a"]), CodecRequest::BitPack),
            Err(Error::IllegalCodec(_))
        ));
    }

    #[test]
    fn descriptor_wire_round_trip() {
        let descs = [
            CodecDescriptor::Passthrough,
            CodecDescriptor::BitPack { bit_width: 13, value_width: 4 },
            CodecDescriptor::ByteAligned { byte_width: 3, value_width: 8 },
            CodecDescriptor::Dictionary { indices: Box::new(CodecDescriptor::BitPack { bit_width: 2, value_width: 4 }) },
            CodecDescriptor::PerValueBlock(BlockAlgorithm::RunLength),
            CodecDescriptor::ChunkedBlock(BlockAlgorithm::Identity),
        ];
        for d in descs {
            let bytes = d.to_bytes();
            let mut r = Reader::new(&bytes);
            assert_eq!(CodecDescriptor::read_from(&mut r).unwrap(), d);
            assert!(r.is_done());
        }
        assert_eq!(CodecDescriptor::BitPack { bit_width: 4, value_width: 8 }.to_bytes(), vec![1, 4, 8]);
    }

    #[test]
    fn chunk_buffers_round_trip() {
        let vals = strings(&["hello", "", "x"]);
        for req in [
            CodecRequest::Passthrough,
            CodecRequest::Dictionary,
            CodecRequest::PerValueBlock(BlockAlgorithm::RunLength),
            CodecRequest::ChunkedBlock(BlockAlgorithm::RunLength),
        ] {
            let codec = Codec::resolve(req, &vals).unwrap();
            let bufs = codec.chunk_buffers(codec.encode(&vals).unwrap());
            assert_eq!(bufs.len(), codec.chunk_buffer_count());
            let refs: Vec<&[u8]> = bufs.iter().map(|b| b.as_slice()).collect();
            assert_eq!(codec.decode_chunk_buffers(&refs, 3).unwrap(), vals, "{req:?}");
        }
    }
}
