// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Struct packing: a whole struct stored as one leaf column.
//!
//! Each field is compressed on its own with a transparent codec; the packed
//! value of a row is then the concatenation, in field order, of
//!
//! ```text
//! [validity bitmap, ceil(fields / 8) bytes, only if some field is nullable]
//! per field: [length prefix, variable-size fields only] compressed bytes
//! ```
//!
//! A null field contributes zero filler (fixed size) or a zero length.
//! The packed leaf is fixed width when every field is.

use crate::array::{ArrayBuilder, DataType, Field, LeafValues, LogicalArray};
use crate::codecs::{bitpack, Codec, CodecRequest, CompressedBuffer, LeafShape};
use crate::repdef::{shred, RepDefLevels};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PackedField {
    pub codec: Codec,
    /// Width of the length prefix; 0 for fixed-size fields.
    pub length_width: u8,
}

#[derive(Debug, Clone)]
pub struct PackedLayout {
    pub fields: Vec<PackedField>,
    pub has_bitmap: bool,
}

impl PackedLayout {
    pub fn bitmap_bytes(&self) -> usize {
        if self.has_bitmap {
            self.fields.len().div_ceil(8)
        } else {
            0
        }
    }

    /// Size of every packed value, when fixed.
    pub fn value_width(&self) -> Option<usize> {
        self.fields
            .iter()
            .map(|f| f.codec.per_value_width())
            .sum::<Option<usize>>()
            .map(|w| w + self.bitmap_bytes())
    }

    pub fn shape(&self) -> LeafShape {
        match self.value_width() {
            Some(w) => LeafShape::Fixed(w),
            None => LeafShape::Variable,
        }
    }
}

/// Children of a struct that can be packed.
pub fn packable_fields(field: &Field) -> Result<&[Field]> {
    match &field.data_type {
        DataType::Struct(fields) if fields.iter().all(|f| f.data_type.is_leaf()) => Ok(fields),
        DataType::Struct(_) => Err(Error::Unsupported(format!(
            "packing {} requires every field to be a leaf type",
            field.name
        ))),
        dt => Err(Error::invalid(format!("only structs can be packed, not {dt}"))),
    }
}

/// Packs `array` (of struct type `field`) into a single leaf column.
pub fn pack_struct(field: &Field, array: &LogicalArray, request: CodecRequest) -> Result<(PackedLayout, RepDefLevels)> {
    let fields = packable_fields(field)?;
    let children = array.children();
    let mut layout = PackedLayout {
        fields: Vec::with_capacity(fields.len()),
        has_bitmap: fields.iter().any(|f| f.nullable),
    };
    let mut columns: Vec<(RepDefLevels, CompressedBuffer)> = Vec::with_capacity(fields.len());
    for (f, child) in fields.iter().zip(children) {
        let levels = shred(f, child)?.remove(0);
        let codec = Codec::resolve(request, &levels.values)?;
        codec.require_transparent()?;
        let compressed = codec.encode(&levels.values)?;
        let length_width = match codec.per_value_width() {
            Some(_) => 0,
            None => {
                let max = (0..compressed.value_count)
                    .map(|i| compressed.extent(i).map(|r| r.len() as u64))
                    .try_fold(0u64, |m, l| l.map(|l| m.max(l)))?;
                bitpack::byte_width_for(max)
            }
        };
        layout.fields.push(PackedField { codec, length_width });
        columns.push((levels, compressed));
    }

    let mut values = layout.shape().empty_values();
    let mut out = RepDefLevels {
        rep: Vec::with_capacity(array.len()),
        def: Vec::with_capacity(array.len()),
        max_rep: 0,
        max_def: field.nullable as u16,
        values: LeafValues::new_variable(),
    };
    let mut next_value = vec![0usize; fields.len()];
    let mut buf = Vec::new();
    for row in 0..array.len() {
        let struct_valid = array.is_valid(row);
        buf.clear();
        buf.resize(layout.bitmap_bytes(), 0);
        for (j, ((levels, compressed), pf)) in columns.iter().zip(&layout.fields).enumerate() {
            let valid = levels.def[row] == 0;
            let bytes = if valid {
                let k = next_value[j];
                next_value[j] += 1;
                Some(compressed.value_bytes(k)?)
            } else {
                None
            };
            if !struct_valid {
                continue;
            }
            if valid && layout.has_bitmap {
                buf[j / 8] |= 1 << (j % 8);
            }
            match (pf.codec.per_value_width(), bytes) {
                (Some(_), Some(b)) => buf.extend_from_slice(&b),
                (Some(w), None) => buf.resize(buf.len() + w, 0),
                (None, Some(b)) => {
                    bitpack::write_uint(b.len() as u64, pf.length_width, &mut buf);
                    buf.extend_from_slice(&b);
                }
                (None, None) => bitpack::write_uint(0, pf.length_width, &mut buf),
            }
        }
        out.rep.push(0);
        if struct_valid {
            out.def.push(0);
            values.push(&buf);
        } else {
            out.def.push(1);
        }
    }
    out.values = values;
    Ok((layout, out))
}

/// Rebuilds the struct array from packed leaf levels.
pub fn unpack_struct(field: &Field, layout: &PackedLayout, levels: &RepDefLevels) -> Result<LogicalArray> {
    let fields = packable_fields(field)?;
    if fields.len() != layout.fields.len() {
        return Err(Error::corrupt(0, "packed field count differs from schema"));
    }
    let mut builder = ArrayBuilder::new(&field.data_type);
    let mut next_value = 0;
    for (i, def) in levels.def.iter().enumerate() {
        if *def != 0 {
            builder.push_null();
            continue;
        }
        let packed = levels.values.get(next_value);
        next_value += 1;
        let mut pos = layout.bitmap_bytes();
        let short = || Error::corrupt(i as u64, "packed value too short");
        for (j, (f, pf)) in fields.iter().zip(&layout.fields).enumerate() {
            let valid = !layout.has_bitmap || packed[j / 8] & (1 << (j % 8)) != 0;
            let len = match pf.codec.per_value_width() {
                Some(w) => w,
                None => {
                    let lw = pf.length_width as usize;
                    let raw = packed.get(pos..pos + lw).ok_or_else(short)?;
                    pos += lw;
                    bitpack::read_uint(raw, lw as u8) as usize
                }
            };
            let bytes = packed.get(pos..pos + len).ok_or_else(short)?;
            pos += len;
            let child = builder.struct_child(j);
            if !valid {
                if !f.nullable {
                    return Err(Error::corrupt(i as u64, "null in non-nullable packed field"));
                }
                child.push_null();
                continue;
            }
            let value = pf.codec.decode_value(bytes)?;
            match f.data_type {
                DataType::Binary | DataType::Utf8 => child.push_bytes(&value)?,
                _ => child.push_fixed(&value)?,
            }
        }
        if pos != packed.len() {
            return Err(Error::corrupt(i as u64, "packed value has trailing bytes"));
        }
        builder.finish_struct();
    }
    Ok(builder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::Value;

    fn two_u32() -> Field {
        Field::new(
            "s",
            DataType::Struct(vec![
                Field::new("a", DataType::UInt32, false),
                Field::new("b", DataType::UInt32, false),
            ]),
            false,
        )
    }

    #[test]
    fn two_u32_fields() {
        let f = two_u32();
        let arr = LogicalArray::from_values(&f.data_type, &[Value::Struct(vec![Value::UInt(1), Value::UInt(2)])]).unwrap();
        let (layout, levels) = pack_struct(&f, &arr, CodecRequest::Passthrough).unwrap();
        assert_eq!(layout.value_width(), Some(8));
        assert_eq!(levels.values.get(0), &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(unpack_struct(&f, &layout, &levels).unwrap(), arr);
    }

    #[test]
    fn five_u64_fields_are_40_bytes() {
        let fields = (0..5).map(|i| Field::new(format!("f{i}"), DataType::UInt64, false)).collect();
        let f = Field::new("s", DataType::Struct(fields), false);
        let rows: Vec<Value> = (0..10).map(|i| Value::Struct((0..5).map(|j| Value::UInt(i * 10 + j)).collect())).collect();
        let arr = LogicalArray::from_values(&f.data_type, &rows).unwrap();
        let (layout, levels) = pack_struct(&f, &arr, CodecRequest::Passthrough).unwrap();
        assert_eq!(layout.value_width(), Some(40));
        assert_eq!(unpack_struct(&f, &layout, &levels).unwrap(), arr);
    }

    #[test]
    fn nullable_and_variable_fields() {
        let f = Field::new(
            "s",
            DataType::Struct(vec![
                Field::new("a", DataType::Int16, true),
                Field::new("b", DataType::Utf8, true),
                Field::new("c", DataType::fixed_size_list(DataType::UInt8, 2), false),
            ]),
            true,
        );
        let rows = vec![
            Value::Struct(vec![Value::Int(-1), Value::from("hello"), Value::List(vec![Value::UInt(1), Value::UInt(2)])]),
            Value::Null,
            Value::Struct(vec![Value::Null, Value::Null, Value::List(vec![Value::UInt(3), Value::UInt(4)])]),
            Value::Struct(vec![Value::Int(7), Value::from(""), Value::List(vec![Value::UInt(5), Value::UInt(6)])]),
        ];
        let arr = LogicalArray::from_values(&f.data_type, &rows).unwrap();
        // dictionary indices take one byte each here, so the packed value becomes fixed
        for (req, shape) in [(CodecRequest::Passthrough, LeafShape::Variable), (CodecRequest::Dictionary, LeafShape::Fixed(4))] {
            let (layout, levels) = pack_struct(&f, &arr, req).unwrap();
            assert_eq!(layout.shape(), shape);
            assert_eq!(levels.def, vec![0, 1, 0, 0]);
            assert_eq!(unpack_struct(&f, &layout, &levels).unwrap(), arr);
        }
    }

    #[test]
    fn rejects_nested_children() {
        let f = Field::new(
            "s",
            DataType::Struct(vec![Field::new("l", DataType::list(DataType::UInt8, false), false)]),
            false,
        );
        let arr = LogicalArray::new_empty(&f.data_type);
        assert!(matches!(pack_struct(&f, &arr, CodecRequest::Passthrough), Err(Error::Unsupported(_))));
        let prim = Field::new("p", DataType::UInt8, false);
        assert!(pack_struct(&prim, &LogicalArray::new_empty(&DataType::UInt8), CodecRequest::Passthrough).is_err());
    }
}
