// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use super::DataType;

/// A single row value, used for building arrays by hand and for row-wise
/// comparison.
#[derive(Debug, Clone)]
pub enum Value {
    Null,
    UInt(u64),
    Int(i64),
    Float32(f32),
    Float64(f64),
    /// Utf8 or Binary payload.
    Bytes(Vec<u8>),
    /// List or fixed-size-list items.
    List(Vec<Value>),
    Struct(Vec<Value>),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        use Value::*;
        match (self, other) {
            (Null, Null) => true,
            (UInt(a), UInt(b)) => a == b,
            (Int(a), Int(b)) => a == b,
            // bitwise so NaN payloads round trip
            (Float32(a), Float32(b)) => a.to_bits() == b.to_bits(),
            (Float64(a), Float64(b)) => a.to_bits() == b.to_bits(),
            (Bytes(a), Bytes(b)) => a == b,
            (List(a), List(b)) => a == b,
            (Struct(a), Struct(b)) => a == b,
            _ => false,
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Bytes(s.as_bytes().to_vec())
    }
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Decodes a little-endian primitive of type `dt`.
    pub(crate) fn decode_primitive(dt: &DataType, bytes: &[u8]) -> Value {
        match dt {
            DataType::UInt8 => Value::UInt(bytes[0] as u64),
            DataType::UInt16 => Value::UInt(u16::from_le_bytes([bytes[0], bytes[1]]) as u64),
            DataType::UInt32 => Value::UInt(u32::from_le_bytes(bytes[..4].try_into().unwrap()) as u64),
            DataType::UInt64 => Value::UInt(u64::from_le_bytes(bytes[..8].try_into().unwrap())),
            DataType::Int8 => Value::Int(bytes[0] as i8 as i64),
            DataType::Int16 => Value::Int(i16::from_le_bytes([bytes[0], bytes[1]]) as i64),
            DataType::Int32 => Value::Int(i32::from_le_bytes(bytes[..4].try_into().unwrap()) as i64),
            DataType::Int64 => Value::Int(i64::from_le_bytes(bytes[..8].try_into().unwrap())),
            DataType::Float32 => Value::Float32(f32::from_le_bytes(bytes[..4].try_into().unwrap())),
            DataType::Float64 => Value::Float64(f64::from_le_bytes(bytes[..8].try_into().unwrap())),
            other => panic!("{other} is not a primitive type"),
        }
    }

    /// Encodes a primitive value as little-endian bytes of type `dt`.
    pub(crate) fn encode_primitive(&self, dt: &DataType, out: &mut Vec<u8>) -> Result<(), String> {
        let width = dt
            .primitive_width()
            .ok_or_else(|| format!("{dt} is not a primitive type"))?;
        match (self, dt) {
            (Value::UInt(v), dt) if dt.is_unsigned_integer() => {
                if width < 8 && *v >> (width * 8) != 0 {
                    return Err(format!("value {v} does not fit in {dt}"));
                }
                out.extend_from_slice(&v.to_le_bytes()[..width]);
            }
            (Value::Int(v), dt) if dt.is_signed_integer() => {
                let bits = width * 8;
                if bits < 64 {
                    let min = -(1i64 << (bits - 1));
                    let max = (1i64 << (bits - 1)) - 1;
                    if *v < min || *v > max {
                        return Err(format!("value {v} does not fit in {dt}"));
                    }
                }
                out.extend_from_slice(&v.to_le_bytes()[..width]);
            }
            (Value::Float32(v), DataType::Float32) => out.extend_from_slice(&v.to_le_bytes()),
            (Value::Float64(v), DataType::Float64) => out.extend_from_slice(&v.to_le_bytes()),
            (v, dt) => return Err(format!("value {v:?} does not match type {dt}")),
        }
        Ok(())
    }
}
