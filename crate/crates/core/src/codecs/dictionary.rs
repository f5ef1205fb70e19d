// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use std::collections::HashMap;

use crate::array::LeafValues;
use crate::wire::{Reader, Writer};
use crate::{Error, Result};

/// Distinct values in first-occurrence order and the index of each input value.
pub fn build(values: &LeafValues) -> (LeafValues, HashMap<Vec<u8>, u32>, Vec<u32>) {
    let mut dict = values.empty_like();
    let mut lookup: HashMap<Vec<u8>, u32> = HashMap::new();
    let mut indices = Vec::with_capacity(values.len());
    for v in values.iter() {
        let next = lookup.len() as u32;
        let idx = *lookup.entry(v.to_vec()).or_insert_with(|| {
            dict.push(v);
            next
        });
        indices.push(idx);
    }
    (dict, lookup, indices)
}

/// Self-describing serialization of leaf values (used for dictionaries).
///
/// `kind u8 (0 fixed, 1 variable) | count u32 | width u32 | data` for fixed,
/// `kind u8 | count u32 | lengths u32 * count | data` for variable.
pub fn write_leaf_values(values: &LeafValues, w: &mut Writer) {
    match values {
        LeafValues::Fixed { width, data } => {
            w.u8(0);
            w.u32(values.len() as u32);
            w.u32(*width as u32);
            w.bytes(data);
        }
        LeafValues::Variable { offsets, data } => {
            w.u8(1);
            w.u32(values.len() as u32);
            for win in offsets.windows(2) {
                w.u32((win[1] - win[0]) as u32);
            }
            w.bytes(data);
        }
    }
}

pub fn read_leaf_values(r: &mut Reader<'_>) -> Result<LeafValues> {
    let kind = r.u8()?;
    let count = r.u32()? as usize;
    match kind {
        0 => {
            let width = r.u32()? as usize;
            if width == 0 {
                return Err(Error::corrupt(r.position() as u64, "zero dictionary value width"));
            }
            let data = r.take(count * width)?.to_vec();
            Ok(LeafValues::Fixed { width, data })
        }
        1 => {
            let mut offsets = Vec::with_capacity(count + 1);
            offsets.push(0u64);
            for _ in 0..count {
                let len = r.u32()? as u64;
                offsets.push(offsets.last().unwrap() + len);
            }
            let data = r.take(*offsets.last().unwrap() as usize)?.to_vec();
            Ok(LeafValues::Variable { offsets, data })
        }
        other => Err(Error::corrupt(r.position() as u64, format!("unknown leaf kind {other}"))),
    }
}
