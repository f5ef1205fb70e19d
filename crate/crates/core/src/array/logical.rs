// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use std::fmt;

use super::{ArrayBuilder, Bitmap, DataType, Field, Value};
use crate::{Error, Result};

/// Type-specific storage of a [`LogicalArray`].
#[derive(Debug, Clone)]
pub enum Payload {
    /// Contiguous little-endian values.
    Primitive(Vec<u8>),
    /// Utf8 / Binary.
    Bytes { offsets: Vec<u64>, data: Vec<u8> },
    List { offsets: Vec<u64>, child: Box<LogicalArray> },
    FixedSizeList(Box<LogicalArray>),
    Struct(Vec<LogicalArray>),
}

/// An in-memory, possibly nested, array.
///
/// Rows marked invalid may carry arbitrary payload. Equality compares only
/// the type, the length, the validity and the payload of valid rows.
#[derive(Debug, Clone)]
pub struct LogicalArray {
    data_type: DataType,
    len: usize,
    validity: Option<Bitmap>,
    payload: Payload,
}

/// First invariant found broken by [`LogicalArray::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Dotted path to the offending child, empty for the root.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Average serialized payload bytes per row, kept as an exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AvgValueWidth {
    pub total_bytes: u64,
    pub rows: u64,
}

impl AvgValueWidth {
    pub fn bytes_per_row(&self) -> f64 {
        if self.rows == 0 {
            0.0
        } else {
            self.total_bytes as f64 / self.rows as f64
        }
    }

    /// `self >= threshold` without rounding.
    pub fn at_least(&self, threshold: u64) -> bool {
        self.total_bytes as u128 >= threshold as u128 * self.rows as u128 && self.rows > 0
    }
}

/// Serialized width of an offset entry when accounting value widths.
pub const SERIALIZED_OFFSET_WIDTH: u64 = 4;

fn violation(path: &str, message: impl Into<String>) -> Violation {
    Violation {
        path: path.to_string(),
        message: message.into(),
    }
}

fn join(path: &str, name: &str) -> String {
    if path.is_empty() {
        name.to_string()
    } else {
        format!("{path}.{name}")
    }
}

fn check_offsets(path: &str, offsets: &[u64], len: usize, end: usize) -> Result<(), Violation> {
    if offsets.len() != len + 1 {
        return Err(violation(
            path,
            format!("expected {} offsets, found {}", len + 1, offsets.len()),
        ));
    }
    if offsets[0] != 0 {
        return Err(violation(path, "first offset must be 0"));
    }
    if offsets.windows(2).any(|w| w[1] < w[0]) {
        return Err(violation(path, "offsets not monotone"));
    }
    if offsets[len] as usize != end {
        return Err(violation(
            path,
            format!("last offset {} does not match child length {end}", offsets[len]),
        ));
    }
    Ok(())
}

impl LogicalArray {
    /// Assembles an array without checking invariants; see [`Self::validate`].
    pub fn from_parts(
        data_type: DataType,
        len: usize,
        validity: Option<Bitmap>,
        payload: Payload,
    ) -> Self {
        Self {
            data_type,
            len,
            validity,
            payload,
        }
    }

    pub fn try_new(
        data_type: DataType,
        len: usize,
        validity: Option<Bitmap>,
        payload: Payload,
    ) -> Result<Self> {
        let array = Self::from_parts(data_type, len, validity, payload);
        array
            .validate()
            .map_err(|v| Error::InvalidArray(v.to_string()))?;
        Ok(array)
    }

    /// Builds an array from row values.
    pub fn from_values(data_type: &DataType, values: &[Value]) -> Result<Self> {
        data_type.check().map_err(Error::InvalidArgument)?;
        let mut builder = ArrayBuilder::new(data_type);
        for v in values {
            builder.push_value(v)?;
        }
        Ok(builder.finish())
    }

    pub fn new_empty(data_type: &DataType) -> Self {
        ArrayBuilder::new(data_type).finish()
    }

    pub fn data_type(&self) -> &DataType {
        &self.data_type
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn validity(&self) -> Option<&Bitmap> {
        self.validity.as_ref()
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn into_parts(self) -> (DataType, usize, Option<Bitmap>, Payload) {
        (self.data_type, self.len, self.validity, self.payload)
    }

    #[inline]
    pub fn is_valid(&self, i: usize) -> bool {
        self.validity.as_ref().is_none_or(|v| v.get(i))
    }

    pub fn null_count(&self) -> usize {
        self.validity
            .as_ref()
            .map_or(0, |v| v.len() - v.count_set())
    }

    /// Struct children, if this is a struct.
    pub fn children(&self) -> &[LogicalArray] {
        match &self.payload {
            Payload::Struct(c) => c,
            _ => &[],
        }
    }

    /// Returns the first violated invariant, if any.
    pub fn validate(&self) -> Result<(), Violation> {
        self.validate_at("")
    }

    /// Like [`Self::validate`], also checking that a non-nullable field holds no nulls.
    pub fn validate_field(&self, field: &Field) -> Result<(), Violation> {
        if self.data_type != field.data_type {
            return Err(violation(
                "",
                format!("type {} does not match field type {}", self.data_type, field.data_type),
            ));
        }
        if !field.nullable && self.null_count() > 0 {
            return Err(violation("", "nulls in non-nullable field"));
        }
        self.validate()
    }

    fn validate_at(&self, path: &str) -> Result<(), Violation> {
        self.data_type.check().map_err(|m| violation(path, m))?;
        if let Some(v) = &self.validity {
            if v.len() != self.len {
                return Err(violation(
                    path,
                    format!("validity has {} bits for {} rows", v.len(), self.len),
                ));
            }
        }
        match (&self.data_type, &self.payload) {
            (DataType::Binary | DataType::Utf8, Payload::Bytes { offsets, data }) => {
                check_offsets(path, offsets, self.len, data.len())?;
                if self.data_type == DataType::Utf8 {
                    for i in 0..self.len {
                        if self.is_valid(i) {
                            let s = &data[offsets[i] as usize..offsets[i + 1] as usize];
                            if std::str::from_utf8(s).is_err() {
                                return Err(violation(path, format!("row {i} is not valid utf-8")));
                            }
                        }
                    }
                }
            }
            (DataType::List(field), Payload::List { offsets, child }) => {
                check_offsets(path, offsets, self.len, child.len)?;
                let child_path = join(path, &field.name);
                if child.data_type != field.data_type {
                    return Err(violation(&child_path, "child type mismatch"));
                }
                if !field.nullable && child.null_count() > 0 {
                    return Err(violation(&child_path, "nulls in non-nullable field"));
                }
                child.validate_at(&child_path)?;
            }
            (DataType::FixedSizeList(item, dim), Payload::FixedSizeList(child)) => {
                let child_path = join(path, "item");
                if child.data_type != **item {
                    return Err(violation(&child_path, "child type mismatch"));
                }
                if child.len != self.len * *dim as usize {
                    return Err(violation(&child_path, "child length mismatch"));
                }
                if child.null_count() > 0 {
                    return Err(violation(&child_path, "fixed-size-list items must not be null"));
                }
                child.validate_at(&child_path)?;
            }
            (DataType::Struct(fields), Payload::Struct(children)) => {
                if fields.len() != children.len() {
                    return Err(violation(path, "struct child count mismatch"));
                }
                for (field, child) in fields.iter().zip(children) {
                    let child_path = join(path, &field.name);
                    if child.data_type != field.data_type {
                        return Err(violation(&child_path, "child type mismatch"));
                    }
                    if child.len != self.len {
                        return Err(violation(&child_path, "child length mismatch"));
                    }
                    if !field.nullable && child.null_count() > 0 {
                        return Err(violation(&child_path, "nulls in non-nullable field"));
                    }
                    child.validate_at(&child_path)?;
                }
            }
            (dt, Payload::Primitive(data)) if dt.is_primitive() => {
                let width = dt.primitive_width().unwrap();
                if data.len() != self.len * width {
                    return Err(violation(
                        path,
                        format!("value buffer has {} bytes, expected {}", data.len(), self.len * width),
                    ));
                }
            }
            (dt, _) => return Err(violation(path, format!("payload does not match type {dt}"))),
        }
        Ok(())
    }

    /// Row `i` as a [`Value`].
    pub fn value(&self, i: usize) -> Value {
        assert!(i < self.len, "row {i} out of range for length {}", self.len);
        if !self.is_valid(i) {
            return Value::Null;
        }
        match &self.payload {
            Payload::Primitive(data) => {
                let w = self.data_type.primitive_width().unwrap();
                Value::decode_primitive(&self.data_type, &data[i * w..(i + 1) * w])
            }
            Payload::Bytes { offsets, data } => {
                Value::Bytes(data[offsets[i] as usize..offsets[i + 1] as usize].to_vec())
            }
            Payload::List { offsets, child } => Value::List(
                (offsets[i] as usize..offsets[i + 1] as usize)
                    .map(|j| child.value(j))
                    .collect(),
            ),
            Payload::FixedSizeList(child) => {
                let dim = child.len / self.len.max(1);
                let dim = match &self.data_type {
                    DataType::FixedSizeList(_, d) => *d as usize,
                    _ => dim,
                };
                Value::List((i * dim..(i + 1) * dim).map(|j| child.value(j)).collect())
            }
            Payload::Struct(children) => Value::Struct(children.iter().map(|c| c.value(i)).collect()),
        }
    }

    pub fn to_values(&self) -> Vec<Value> {
        (0..self.len).map(|i| self.value(i)).collect()
    }

    /// Rows `[start, start + len)` with offsets re-based to zero.
    pub fn slice(&self, start: usize, len: usize) -> Result<LogicalArray> {
        if start.checked_add(len).is_none_or(|end| end > self.len) {
            return Err(Error::OutOfRange {
                index: (start + len) as u64,
                len: self.len as u64,
            });
        }
        Ok(self.slice_unchecked(start, len))
    }

    fn slice_unchecked(&self, start: usize, len: usize) -> LogicalArray {
        let validity = self.validity.as_ref().map(|v| v.slice(start, len));
        let payload = match &self.payload {
            Payload::Primitive(data) => {
                let w = self.data_type.primitive_width().unwrap();
                Payload::Primitive(data[start * w..(start + len) * w].to_vec())
            }
            Payload::Bytes { offsets, data } => {
                let base = offsets[start];
                let end = offsets[start + len];
                Payload::Bytes {
                    offsets: offsets[start..=start + len].iter().map(|o| o - base).collect(),
                    data: data[base as usize..end as usize].to_vec(),
                }
            }
            Payload::List { offsets, child } => {
                let base = offsets[start];
                let end = offsets[start + len];
                Payload::List {
                    offsets: offsets[start..=start + len].iter().map(|o| o - base).collect(),
                    child: Box::new(child.slice_unchecked(base as usize, (end - base) as usize)),
                }
            }
            Payload::FixedSizeList(child) => {
                let dim = match &self.data_type {
                    DataType::FixedSizeList(_, d) => *d as usize,
                    _ => unreachable!(),
                };
                Payload::FixedSizeList(Box::new(child.slice_unchecked(start * dim, len * dim)))
            }
            Payload::Struct(children) => Payload::Struct(
                children.iter().map(|c| c.slice_unchecked(start, len)).collect(),
            ),
        };
        LogicalArray {
            data_type: self.data_type.clone(),
            len,
            validity,
            payload,
        }
    }

    /// Concatenates arrays of identical type.
    pub fn concat(arrays: &[LogicalArray]) -> Result<LogicalArray> {
        let Some(first) = arrays.first() else {
            return Err(Error::invalid("concat of zero arrays"));
        };
        if let Some(bad) = arrays.iter().find(|a| a.data_type != first.data_type) {
            return Err(Error::invalid(format!(
                "concat type mismatch: {} vs {}",
                first.data_type, bad.data_type
            )));
        }
        if arrays.len() == 1 {
            return Ok(first.clone());
        }
        Ok(Self::concat_unchecked(arrays))
    }

    fn concat_unchecked(arrays: &[LogicalArray]) -> LogicalArray {
        let first = &arrays[0];
        let len: usize = arrays.iter().map(|a| a.len).sum();
        let validity = if arrays.iter().any(|a| a.validity.is_some()) {
            let mut bm = Bitmap::with_capacity(len);
            for a in arrays {
                match &a.validity {
                    Some(v) => bm.extend_from(v),
                    None => (0..a.len).for_each(|_| bm.push(true)),
                }
            }
            Some(bm)
        } else {
            None
        };
        let payload = match &first.payload {
            Payload::Primitive(_) => {
                let mut out = Vec::new();
                for a in arrays {
                    if let Payload::Primitive(d) = &a.payload {
                        out.extend_from_slice(d);
                    }
                }
                Payload::Primitive(out)
            }
            Payload::Bytes { .. } => {
                let mut offsets = vec![0u64];
                let mut data = Vec::new();
                for a in arrays {
                    if let Payload::Bytes { offsets: o, data: d } = &a.payload {
                        let base = data.len() as u64;
                        offsets.extend(o[1..].iter().map(|x| x + base));
                        data.extend_from_slice(d);
                    }
                }
                Payload::Bytes { offsets, data }
            }
            Payload::List { .. } => {
                let mut offsets = vec![0u64];
                let mut children = Vec::with_capacity(arrays.len());
                let mut base = 0u64;
                for a in arrays {
                    if let Payload::List { offsets: o, child } = &a.payload {
                        offsets.extend(o[1..].iter().map(|x| x + base));
                        base += child.len as u64;
                        children.push((**child).clone());
                    }
                }
                Payload::List {
                    offsets,
                    child: Box::new(Self::concat_unchecked(&children)),
                }
            }
            Payload::FixedSizeList(_) => {
                let children: Vec<_> = arrays
                    .iter()
                    .map(|a| match &a.payload {
                        Payload::FixedSizeList(c) => (**c).clone(),
                        _ => unreachable!(),
                    })
                    .collect();
                Payload::FixedSizeList(Box::new(Self::concat_unchecked(&children)))
            }
            Payload::Struct(first_children) => Payload::Struct(
                (0..first_children.len())
                    .map(|i| {
                        let col: Vec<_> = arrays.iter().map(|a| a.children()[i].clone()).collect();
                        Self::concat_unchecked(&col)
                    })
                    .collect(),
            ),
        };
        LogicalArray {
            data_type: first.data_type.clone(),
            len,
            validity,
            payload,
        }
    }

    /// Gathers rows by index (any order, duplicates allowed).
    pub fn take(&self, indices: &[usize]) -> Result<LogicalArray> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len) {
            return Err(Error::OutOfRange {
                index: bad as u64,
                len: self.len as u64,
            });
        }
        if indices.is_empty() {
            return Ok(Self::new_empty(&self.data_type));
        }
        // group consecutive runs so contiguous selections stay cheap
        let mut pieces = Vec::new();
        let mut run_start = indices[0];
        let mut run_len = 1;
        for w in indices.windows(2) {
            if w[1] == w[0] + 1 {
                run_len += 1;
            } else {
                pieces.push(self.slice_unchecked(run_start, run_len));
                run_start = w[1];
                run_len = 1;
            }
        }
        pieces.push(self.slice_unchecked(run_start, run_len));
        Ok(Self::concat_unchecked(&pieces))
    }

    /// Total serialized payload bytes divided by the row count.
    ///
    /// Value buffers count at their byte size; each offsets buffer counts
    /// `len + 1` entries of [`SERIALIZED_OFFSET_WIDTH`] bytes. Validity is not
    /// counted.
    pub fn avg_value_width(&self) -> Result<AvgValueWidth> {
        if self.len == 0 {
            return Err(Error::UndefinedWidth("zero-length array".into()));
        }
        Ok(AvgValueWidth {
            total_bytes: self.payload_bytes(),
            rows: self.len as u64,
        })
    }

    fn payload_bytes(&self) -> u64 {
        let offsets = (self.len as u64 + 1) * SERIALIZED_OFFSET_WIDTH;
        match &self.payload {
            Payload::Primitive(d) => d.len() as u64,
            Payload::Bytes { data, .. } => data.len() as u64 + offsets,
            Payload::List { child, .. } => offsets + child.payload_bytes(),
            Payload::FixedSizeList(child) => child.payload_bytes(),
            Payload::Struct(children) => children.iter().map(|c| c.payload_bytes()).sum(),
        }
    }
}

impl PartialEq for LogicalArray {
    fn eq(&self, other: &Self) -> bool {
        self.data_type == other.data_type
            && self.len == other.len
            && (0..self.len).all(|i| self.value(i) == other.value(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utf8(values: &[Option<&str>]) -> LogicalArray {
        let vals: Vec<Value> = values
            .iter()
            .map(|v| v.map_or(Value::Null, Value::from))
            .collect();
        LogicalArray::from_values(&DataType::Utf8, &vals).unwrap()
    }

    fn list_u64(rows: &[Option<Vec<u64>>]) -> LogicalArray {
        let vals: Vec<Value> = rows
            .iter()
            .map(|r| match r {
                Some(items) => Value::List(items.iter().map(|v| Value::UInt(*v)).collect()),
                None => Value::Null,
            })
            .collect();
        LogicalArray::from_values(&DataType::list(DataType::UInt64, false), &vals).unwrap()
    }

    #[test]
    fn empty_utf8_is_valid() {
        let a = LogicalArray::from_parts(
            DataType::Utf8,
            0,
            None,
            Payload::Bytes { offsets: vec![0], data: vec![] },
        );
        assert_eq!(a.validate(), Ok(()));
    }

    #[test]
    fn non_monotone_list_offsets_rejected() {
        let child = LogicalArray::from_values(&DataType::UInt64, &[Value::UInt(1), Value::UInt(2)]).unwrap();
        // offsets [0,2,1] with a child of length 1 so only monotonicity breaks
        let child = child.slice(0, 1).unwrap();
        let a = LogicalArray::from_parts(
            DataType::list(DataType::UInt64, false),
            2,
            None,
            Payload::List { offsets: vec![0, 2, 1], child: Box::new(child) },
        );
        let err = a.validate().unwrap_err();
        assert_eq!(err.message, "offsets not monotone");
    }

    #[test]
    fn struct_child_length_mismatch_rejected() {
        let a = LogicalArray::from_values(&DataType::UInt8, &vec![Value::UInt(1); 3]).unwrap();
        let b = LogicalArray::from_values(&DataType::UInt8, &vec![Value::UInt(1); 4]).unwrap();
        let dt = DataType::Struct(vec![
            Field::new("a", DataType::UInt8, false),
            Field::new("b", DataType::UInt8, false),
        ]);
        let s = LogicalArray::from_parts(dt, 3, None, Payload::Struct(vec![a, b]));
        let err = s.validate().unwrap_err();
        assert_eq!(err.message, "child length mismatch");
        assert_eq!(err.path, "b");
    }

    #[test]
    fn avg_value_width_examples() {
        let vals: Vec<Value> = (0..1000).map(Value::UInt).collect();
        let a = LogicalArray::from_values(&DataType::UInt64, &vals).unwrap();
        assert_eq!(a.avg_value_width().unwrap().bytes_per_row(), 8.0);

        let dt = DataType::fixed_size_list(DataType::Float32, 768);
        let row = Value::List(vec![Value::Float32(0.5); 768]);
        let a = LogicalArray::from_values(&dt, &vec![row; 10]).unwrap();
        assert_eq!(a.avg_value_width().unwrap().bytes_per_row(), 3072.0);

        // 3 data bytes + 3 offsets * 4 bytes over 2 rows
        let a = utf8(&[Some("AB"), Some("C")]);
        assert_eq!(a.avg_value_width().unwrap().bytes_per_row(), 7.5);

        let empty = LogicalArray::new_empty(&DataType::UInt64);
        assert!(matches!(empty.avg_value_width(), Err(Error::UndefinedWidth(_))));
    }

    #[test]
    fn slice_examples() {
        let a = utf8(&[Some("AB"), Some("C"), Some("D")]);
        assert_eq!(a.slice(0, 3).unwrap(), a);
        assert_eq!(a.slice(1, 2).unwrap(), utf8(&[Some("C"), Some("D")]));

        let l = list_u64(&[Some(vec![1, 2]), Some(vec![]), Some(vec![3])]);
        let s = l.slice(2, 1).unwrap();
        assert_eq!(s, list_u64(&[Some(vec![3])]));
        match s.payload() {
            Payload::List { offsets, .. } => assert_eq!(offsets, &vec![0, 1]),
            _ => unreachable!(),
        }
        assert!(l.slice(2, 2).is_err());
    }

    #[test]
    fn equality_ignores_payload_under_nulls() {
        let a = LogicalArray::from_parts(
            DataType::UInt8,
            2,
            Some(Bitmap::from_bools([true, false])),
            Payload::Primitive(vec![1, 7]),
        );
        let b = LogicalArray::from_parts(
            DataType::UInt8,
            2,
            Some(Bitmap::from_bools([true, false])),
            Payload::Primitive(vec![1, 99]),
        );
        assert_eq!(a, b);
        let c = LogicalArray::from_parts(DataType::UInt8, 2, None, Payload::Primitive(vec![1, 7]));
        assert_ne!(a, c);
    }

    #[test]
    fn concat_and_take() {
        let a = list_u64(&[Some(vec![1, 2]), None]);
        let b = list_u64(&[Some(vec![]), Some(vec![3])]);
        let c = LogicalArray::concat(&[a, b]).unwrap();
        assert_eq!(c, list_u64(&[Some(vec![1, 2]), None, Some(vec![]), Some(vec![3])]));
        assert_eq!(c.validate(), Ok(()));
        let t = c.take(&[3, 0, 0]).unwrap();
        assert_eq!(t, list_u64(&[Some(vec![3]), Some(vec![1, 2]), Some(vec![1, 2])]));
        assert!(c.take(&[4]).is_err());
    }
}
