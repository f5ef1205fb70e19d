// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Binary form of [`DataType`] and [`Field`].
//!
//! A type is one tag byte followed by its parameters:
//! primitives 0-9 in declaration order, 10 binary, 11 utf8,
//! 12 fixed-size list (item type, u32 dimension), 13 list (item field),
//! 14 struct (u16 count, fields). A field is its name (u16 length + utf-8),
//! a nullable byte and its type.

use crate::array::{DataType, Field};
use crate::wire::{Reader, Writer};
use crate::Result;

const PRIMITIVES: [DataType; 10] = [
    DataType::UInt8,
    DataType::UInt16,
    DataType::UInt32,
    DataType::UInt64,
    DataType::Int8,
    DataType::Int16,
    DataType::Int32,
    DataType::Int64,
    DataType::Float32,
    DataType::Float64,
];

pub fn write_type(dt: &DataType, w: &mut Writer) {
    match dt {
        DataType::Binary => w.u8(10),
        DataType::Utf8 => w.u8(11),
        DataType::FixedSizeList(item, dim) => {
            w.u8(12);
            write_type(item, w);
            w.u32(*dim);
        }
        DataType::List(item) => {
            w.u8(13);
            write_field(item, w);
        }
        DataType::Struct(fields) => {
            w.u8(14);
            w.u16(fields.len() as u16);
            for f in fields {
                write_field(f, w);
            }
        }
        prim => w.u8(PRIMITIVES.iter().position(|p| p == prim).unwrap() as u8),
    }
}

pub fn read_type(r: &mut Reader<'_>) -> Result<DataType> {
    let dt = match r.u8()? {
        t @ 0..=9 => PRIMITIVES[t as usize].clone(),
        10 => DataType::Binary,
        11 => DataType::Utf8,
        12 => {
            let item = read_type(r)?;
            DataType::FixedSizeList(Box::new(item), r.u32()?)
        }
        13 => DataType::List(Box::new(read_field(r)?)),
        14 => {
            let n = r.u16()? as usize;
            DataType::Struct((0..n).map(|_| read_field(r)).collect::<Result<_>>()?)
        }
        t => return Err(r.error(format!("unknown type tag {t}"))),
    };
    dt.check().map_err(|m| r.error(m))?;
    Ok(dt)
}

pub fn write_field(f: &Field, w: &mut Writer) {
    w.str(&f.name);
    w.u8(f.nullable as u8);
    write_type(&f.data_type, w);
}

pub fn read_field(r: &mut Reader<'_>) -> Result<Field> {
    let name = r.str()?;
    let nullable = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(r.error("bad nullable flag")),
    };
    Ok(Field::new(name, read_type(r)?, nullable))
}
