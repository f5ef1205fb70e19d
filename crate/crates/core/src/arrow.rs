// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Arrow-style baseline layout.
//!
//! Each array node stores its buffers as separate contiguous extents:
//! a validity bitmap when the field is nullable, 64-bit offsets for lists
//! and byte arrays, and dense leaf data (null slots hold placeholder bytes).
//! There are no pages, chunks or compression.
//!
//! Random access has to walk the nesting one level at a time, because the
//! position of a child's values is only known once the parent's offsets have
//! been read. [`take_arrow`] issues those reads in dependent phases and
//! records them in a trace.

use std::collections::HashMap;
use std::ops::Range;

use bytes::Bytes;

use crate::array::{Bitmap, DataType, Field, LogicalArray, Payload, Value};
use crate::io::{IoEngine, ReadRequest, ReadTag, SECTOR_BYTES};
use crate::wire::{Reader, Writer};
use crate::{Error, Result};

/// Byte range of one buffer in the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Extent {
    pub offset: u64,
    pub length: u64,
}

impl Extent {
    pub fn range(&self) -> Range<u64> {
        self.offset..self.offset + self.length
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArrowNode {
    pub validity: Option<Extent>,
    pub offsets: Option<Extent>,
    pub data: Option<Extent>,
    pub children: Vec<ArrowNode>,
}

impl ArrowNode {
    /// Extents in file order.
    pub fn extents(&self) -> Vec<Extent> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut Vec<Extent>) {
        out.extend(self.validity);
        out.extend(self.offsets);
        for c in &self.children {
            c.collect(out);
        }
        out.extend(self.data);
    }

    pub fn write_to(&self, w: &mut Writer) {
        let flags = self.validity.is_some() as u8
            | (self.offsets.is_some() as u8) << 1
            | (self.data.is_some() as u8) << 2;
        w.u8(flags);
        for e in [self.validity, self.offsets, self.data].into_iter().flatten() {
            w.u64(e.offset);
            w.u64(e.length);
        }
        w.u16(self.children.len() as u16);
        for c in &self.children {
            c.write_to(w);
        }
    }

    pub fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        let flags = r.u8()?;
        if flags & !0b111 != 0 {
            return Err(r.error("unknown arrow node flags"));
        }
        let mut extent = |bit: u8| -> Result<Option<Extent>> {
            if flags & (1 << bit) == 0 {
                return Ok(None);
            }
            Ok(Some(Extent { offset: r.u64()?, length: r.u64()? }))
        };
        let validity = extent(0)?;
        let offsets = extent(1)?;
        let data = extent(2)?;
        let n = r.u16()? as usize;
        let children = (0..n).map(|_| ArrowNode::read_from(r)).collect::<Result<_>>()?;
        Ok(Self { validity, offsets, data, children })
    }
}

/// An array stored in the baseline layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrowLayout {
    pub field: Field,
    pub len: u64,
    pub root: ArrowNode,
}

fn pad8(out: &mut Vec<u8>) {
    out.resize(out.len().next_multiple_of(8), 0);
}

fn push_extent(out: &mut Vec<u8>, base: u64, bytes: &[u8]) -> Extent {
    pad8(out);
    let e = Extent { offset: base + out.len() as u64, length: bytes.len() as u64 };
    out.extend_from_slice(bytes);
    e
}

fn offsets_bytes(offsets: &[u64]) -> Vec<u8> {
    offsets.iter().flat_map(|o| o.to_le_bytes()).collect()
}

fn write_node(nullable: bool, array: &LogicalArray, base: u64, out: &mut Vec<u8>) -> ArrowNode {
    let mut node = ArrowNode::default();
    if nullable {
        let bitmap = match array.validity() {
            Some(v) => v.clone(),
            None => Bitmap::new_set(array.len()),
        };
        node.validity = Some(push_extent(out, base, bitmap.as_bytes()));
    }
    match (array.data_type(), array.payload()) {
        (_, Payload::Primitive(data)) => node.data = Some(push_extent(out, base, data)),
        (_, Payload::Bytes { offsets, data }) => {
            node.offsets = Some(push_extent(out, base, &offsets_bytes(offsets)));
            node.data = Some(push_extent(out, base, data));
        }
        (_, Payload::FixedSizeList(child)) => match child.payload() {
            Payload::Primitive(data) => node.data = Some(push_extent(out, base, data)),
            _ => unreachable!("fixed-size list items are primitive"),
        },
        (DataType::List(item), Payload::List { offsets, child }) => {
            node.offsets = Some(push_extent(out, base, &offsets_bytes(offsets)));
            node.children.push(write_node(item.nullable, child, base, out));
        }
        (DataType::Struct(fields), Payload::Struct(children)) => {
            for (f, c) in fields.iter().zip(children) {
                node.children.push(write_node(f.nullable, c, base, out));
            }
        }
        (dt, _) => unreachable!("payload does not match {dt}"),
    }
    node
}

/// Serializes `array` with its buffers placed at file offset `base`.
pub fn write_arrow_layout(field: &Field, array: &LogicalArray, base: u64) -> Result<(Vec<u8>, ArrowLayout)> {
    array
        .validate_field(field)
        .map_err(|v| Error::InvalidArray(v.to_string()))?;
    let mut out = Vec::new();
    let root = write_node(field.nullable, array, base, &mut out);
    Ok((out, ArrowLayout { field: field.clone(), len: array.len() as u64, root }))
}

fn read_offsets(bytes: &[u8]) -> Vec<u64> {
    bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect()
}

fn build_node(
    dt: &DataType,
    nullable: bool,
    len: usize,
    node: &ArrowNode,
    bufs: &mut impl Iterator<Item = Bytes>,
) -> Result<LogicalArray> {
    let mut next = |present: bool| -> Result<Option<Bytes>> {
        if !present {
            return Ok(None);
        }
        bufs.next().map(Some).ok_or_else(|| Error::corrupt(0, "missing arrow buffer"))
    };
    let validity = match next(node.validity.is_some())? {
        Some(b) if b.len() == len.div_ceil(8) => Some(Bitmap::from_bytes(b.to_vec(), len)),
        Some(_) => {
            return Err(Error::corrupt(node.validity.unwrap().offset, "validity bitmap size mismatch"))
        }
        None if nullable => return Err(Error::corrupt(0, "nullable field without validity")),
        None => None,
    };
    let validity = validity.filter(|v| v.count_set() != len);
    let offsets = next(node.offsets.is_some())?.map(|b| read_offsets(&b));
    let payload = match dt {
        DataType::List(item) => {
            let offsets = offsets.ok_or_else(|| Error::corrupt(0, "list without offsets"))?;
            let child_len = *offsets.last().unwrap_or(&0) as usize;
            let child_node = node
                .children
                .first()
                .ok_or_else(|| Error::corrupt(0, "list without child"))?;
            let child = build_node(&item.data_type, item.nullable, child_len, child_node, bufs)?;
            Payload::List { offsets, child: Box::new(child) }
        }
        DataType::Struct(fields) => {
            if node.children.len() != fields.len() {
                return Err(Error::corrupt(0, "struct child count mismatch"));
            }
            let children = fields
                .iter()
                .zip(&node.children)
                .map(|(f, n)| build_node(&f.data_type, f.nullable, len, n, bufs))
                .collect::<Result<_>>()?;
            Payload::Struct(children)
        }
        _ => {
            let data = next(node.data.is_some())?
                .ok_or_else(|| Error::corrupt(0, "leaf without data"))?
                .to_vec();
            match dt {
                DataType::Binary | DataType::Utf8 => Payload::Bytes {
                    offsets: offsets.ok_or_else(|| Error::corrupt(0, "byte array without offsets"))?,
                    data,
                },
                DataType::FixedSizeList(item, dim) => Payload::FixedSizeList(Box::new(
                    LogicalArray::from_parts((**item).clone(), len * *dim as usize, None, Payload::Primitive(data)),
                )),
                _ => Payload::Primitive(data),
            }
        }
    };
    LogicalArray::try_new(dt.clone(), len, validity, payload)
}

/// Reads every extent once and rebuilds the array.
pub fn scan_arrow(io: &IoEngine, layout: &ArrowLayout) -> Result<LogicalArray> {
    let requests: Vec<ReadRequest> = layout
        .root
        .extents()
        .iter()
        .map(|e| ReadRequest::new(e.range(), ReadTag::Data))
        .collect();
    let bufs = io.submit(&requests)?;
    let f = &layout.field;
    build_node(&f.data_type, f.nullable, layout.len as usize, &layout.root, &mut bufs.into_iter())
}

/// One read issued by [`take_arrow`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub phase: usize,
    pub request: ReadRequest,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArrowTrace {
    pub entries: Vec<TraceEntry>,
}

impl ArrowTrace {
    pub fn phases(&self) -> usize {
        self.entries.iter().map(|e| e.phase).max().unwrap_or(0)
    }

    /// Reads planned, before any coalescing.
    pub fn iops(&self) -> usize {
        self.entries.len()
    }
}

/// Buffers fetched for one node on behalf of one requested row.
#[derive(Debug, Default, Clone)]
struct Fetched {
    /// First element index covered.
    start: u64,
    /// Byte offset within the bitmap of the fetched slice, and the slice.
    validity: Option<(u64, Bytes)>,
    offsets: Option<Vec<u64>>,
    /// Byte offset within the data buffer of the fetched slice, and the slice.
    data: Option<(u64, Bytes)>,
}

/// Path of child indices from the root.
type NodeId = Vec<usize>;

struct Work<'a> {
    id: NodeId,
    dt: &'a DataType,
    node: &'a ArrowNode,
    row: usize,
    range: Range<u64>,
}

enum Pending {
    Validity,
    Offsets,
    Data,
}

/// Widens an empty range to one byte so every planned read is issued; plans
/// then depend only on the type, never on the data.
fn nonempty(range: Range<u64>, extent: &Extent) -> Range<u64> {
    if range.start < range.end {
        return range;
    }
    if extent.length == 0 {
        // an empty buffer may end the file; read the byte before it
        let start = extent.offset.saturating_sub(1);
        return start..start + 1;
    }
    let start = range.start.min(extent.offset + extent.length - 1);
    start..start + 1
}

/// The sector-aligned slice of a bitmap holding elements `range`.
fn validity_read(e: &Extent, range: &Range<u64>) -> Range<u64> {
    let first = e.offset + range.start / 8;
    let last = e.offset + range.end.max(range.start + 1).div_ceil(8);
    let start = (first / SECTOR_BYTES * SECTOR_BYTES).max(e.offset);
    let end = (last.div_ceil(SECTOR_BYTES) * SECTOR_BYTES).min(e.offset + e.length);
    nonempty(start..end, e)
}

/// Fetches `rows` (any order, duplicates allowed) and returns them with the
/// read trace. Reads of one phase are submitted together.
pub fn take_arrow(io: &IoEngine, layout: &ArrowLayout, rows: &[u64]) -> Result<(LogicalArray, ArrowTrace)> {
    for r in rows {
        if *r >= layout.len {
            return Err(Error::OutOfRange { index: *r, len: layout.len });
        }
    }
    let mut fetched: HashMap<(NodeId, usize), Fetched> = HashMap::new();
    let mut trace = ArrowTrace::default();
    let mut work: Vec<Work<'_>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| Work {
            id: vec![],
            dt: &layout.field.data_type,
            node: &layout.root,
            row: i,
            range: *r..*r + 1,
        })
        .collect();
    // byte arrays whose data read waits on their offsets
    let mut data_after_offsets: Vec<(NodeId, usize)> = Vec::new();
    let mut phase = 0;
    while !work.is_empty() || !data_after_offsets.is_empty() {
        phase += 1;
        // struct children share the parent's range, so they join this phase
        let mut expanded = Vec::new();
        while let Some(w) = work.pop() {
            if let DataType::Struct(fields) = w.dt {
                for (i, f) in fields.iter().enumerate() {
                    let mut id = w.id.clone();
                    id.push(i);
                    work.push(Work {
                        id,
                        dt: &f.data_type,
                        node: &w.node.children[i],
                        row: w.row,
                        range: w.range.clone(),
                    });
                }
            }
            expanded.push(w);
        }
        let mut requests = Vec::new();
        let mut pending = Vec::new();
        for (id, row) in data_after_offsets.drain(..) {
            let offs = fetched[&(id.clone(), row)].offsets.as_ref().unwrap();
            let e = node_at(&layout.root, &id).data.unwrap();
            let range = nonempty(e.offset + offs[0]..e.offset + offs[offs.len() - 1], &e);
            requests.push(ReadRequest::new(range, ReadTag::Data));
            pending.push((id, row, Pending::Data));
        }
        for w in &expanded {
            fetched.entry((w.id.clone(), w.row)).or_default().start = w.range.start;
            if let Some(e) = w.node.validity {
                requests.push(ReadRequest::new(validity_read(&e, &w.range), ReadTag::Data));
                pending.push((w.id.clone(), w.row, Pending::Validity));
            }
            if let Some(e) = w.node.offsets {
                let range = e.offset + w.range.start * 8..e.offset + (w.range.end + 1) * 8;
                requests.push(ReadRequest::new(range, ReadTag::Data));
                pending.push((w.id.clone(), w.row, Pending::Offsets));
            }
            if let Some(width) = w.dt.fixed_width() {
                let width = width as u64;
                let e = w.node.data.unwrap();
                let range = nonempty(e.offset + w.range.start * width..e.offset + w.range.end * width, &e);
                requests.push(ReadRequest::new(range, ReadTag::Data));
                pending.push((w.id.clone(), w.row, Pending::Data));
            }
        }
        let bufs = io.submit(&requests)?;
        let mut next_work = Vec::new();
        for ((req, buf), (id, row, kind)) in requests.iter().zip(bufs).zip(pending) {
            // reads of empty buffers may start before them; nothing is decoded from those
            trace.entries.push(TraceEntry { phase, request: req.clone() });
            let node = node_at(&layout.root, &id);
            let entry = fetched.get_mut(&(id.clone(), row)).unwrap();
            match kind {
                Pending::Validity => entry.validity = Some((req.offset.saturating_sub(node.validity.unwrap().offset), buf)),
                Pending::Data => entry.data = Some((req.offset.saturating_sub(node.data.unwrap().offset), buf)),
                Pending::Offsets => {
                    let offs = read_offsets(&buf);
                    let child_range = offs[0]..offs[offs.len() - 1];
                    entry.offsets = Some(offs);
                    match type_at(&layout.field.data_type, &id) {
                        DataType::List(item) => {
                            let mut cid = id.clone();
                            cid.push(0);
                            next_work.push(Work {
                                id: cid,
                                dt: &item.data_type,
                                node: &node.children[0],
                                row,
                                range: child_range,
                            });
                        }
                        _ => data_after_offsets.push((id, row)),
                    }
                }
            }
        }
        work = next_work;
    }
    let values: Vec<Value> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| value_at(&layout.field, &layout.root, &fetched, &mut vec![], i, *r))
        .collect::<Result<_>>()?;
    Ok((LogicalArray::from_values(&layout.field.data_type, &values)?, trace))
}

fn node_at<'a>(root: &'a ArrowNode, id: &[usize]) -> &'a ArrowNode {
    id.iter().fold(root, |n, i| &n.children[*i])
}

fn type_at<'a>(dt: &'a DataType, id: &[usize]) -> &'a DataType {
    id.iter().fold(dt, |dt, i| match dt {
        DataType::List(f) => &f.data_type,
        DataType::Struct(fs) => &fs[*i].data_type,
        other => other,
    })
}

fn value_at(
    field: &Field,
    node: &ArrowNode,
    fetched: &HashMap<(NodeId, usize), Fetched>,
    id: &mut NodeId,
    row: usize,
    index: u64,
) -> Result<Value> {
    let f = fetched
        .get(&(id.clone(), row))
        .ok_or_else(|| Error::corrupt(0, "arrow take missed a buffer"))?;
    if let Some((base, bits)) = &f.validity {
        let byte = (index / 8 - base) as usize;
        if bits.get(byte).is_none_or(|b| b & (1 << (index % 8)) == 0) {
            return Ok(Value::Null);
        }
    }
    let data = |start: u64, end: u64| -> Result<&[u8]> {
        let (base, bytes) = f.data.as_ref().ok_or_else(|| Error::corrupt(0, "missing data"))?;
        bytes
            .get((start - base) as usize..(end - base) as usize)
            .ok_or_else(|| Error::corrupt(0, "data read too short"))
    };
    let local = (index - f.start) as usize;
    Ok(match &field.data_type {
        DataType::List(item) => {
            let offs = f.offsets.as_ref().unwrap();
            id.push(0);
            let items = (offs[local]..offs[local + 1])
                .map(|j| value_at(item, &node.children[0], fetched, id, row, j))
                .collect::<Result<_>>();
            id.pop();
            Value::List(items?)
        }
        DataType::Struct(fields) => {
            let mut out = Vec::with_capacity(fields.len());
            for (i, cf) in fields.iter().enumerate() {
                id.push(i);
                let v = value_at(cf, &node.children[i], fetched, id, row, index);
                id.pop();
                out.push(v?);
            }
            Value::Struct(out)
        }
        DataType::Binary | DataType::Utf8 => {
            let offs = f.offsets.as_ref().unwrap();
            Value::Bytes(data(offs[local], offs[local + 1])?.to_vec())
        }
        DataType::FixedSizeList(item, dim) => {
            let w = item.primitive_width().unwrap() as u64;
            let width = w * *dim as u64;
            let bytes = data(index * width, (index + 1) * width)?;
            Value::List(
                bytes
                    .chunks_exact(w as usize)
                    .map(|c| Value::decode_primitive(item, c))
                    .collect(),
            )
        }
        dt => {
            let w = dt.primitive_width().unwrap() as u64;
            Value::decode_primitive(dt, data(index * w, (index + 1) * w)?)
        }
    })
}

/// `(reads, phases)` of a single-row take of `field`, from the type alone.
pub fn planned_take_iops(field: &Field) -> (usize, usize) {
    fn walk(dt: &DataType, nullable: bool, phase: usize, iops: &mut usize, phases: &mut usize) {
        *phases = (*phases).max(phase);
        *iops += nullable as usize;
        match dt {
            DataType::List(item) => {
                *iops += 1;
                walk(&item.data_type, item.nullable, phase + 1, iops, phases);
            }
            DataType::Struct(fields) => {
                for f in fields {
                    walk(&f.data_type, f.nullable, phase, iops, phases);
                }
            }
            DataType::Binary | DataType::Utf8 => {
                *iops += 2;
                *phases = (*phases).max(phase + 1);
            }
            _ => *iops += 1,
        }
    }
    let (mut iops, mut phases) = (0, 0);
    walk(&field.data_type, field.nullable, 1, &mut iops, &mut phases);
    (iops, phases)
}
