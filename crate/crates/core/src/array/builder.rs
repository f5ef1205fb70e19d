// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use super::{Bitmap, DataType, LogicalArray, Payload, Value};
use crate::{Error, Result};

/// Incremental builder for a [`LogicalArray`] of a given type.
#[derive(Debug)]
pub struct ArrayBuilder {
    data_type: DataType,
    validity: Bitmap,
    null_count: usize,
    kind: BuilderKind,
}

#[derive(Debug)]
enum BuilderKind {
    Primitive { width: usize, data: Vec<u8> },
    Bytes { offsets: Vec<u64>, data: Vec<u8> },
    List { offsets: Vec<u64>, child: Box<ArrayBuilder>, child_nullable: bool },
    Fsl { item: DataType, dim: usize, width: usize, data: Vec<u8> },
    Struct { children: Vec<(ArrayBuilder, bool)> },
}

impl ArrayBuilder {
    pub fn new(data_type: &DataType) -> Self {
        let kind = match data_type {
            DataType::Binary | DataType::Utf8 => BuilderKind::Bytes {
                offsets: vec![0],
                data: Vec::new(),
            },
            DataType::FixedSizeList(item, dim) => BuilderKind::Fsl {
                item: (**item).clone(),
                dim: *dim as usize,
                width: item.primitive_width().expect("fsl item must be primitive"),
                data: Vec::new(),
            },
            DataType::List(field) => BuilderKind::List {
                offsets: vec![0],
                child: Box::new(ArrayBuilder::new(&field.data_type)),
                child_nullable: field.nullable,
            },
            DataType::Struct(fields) => BuilderKind::Struct {
                children: fields
                    .iter()
                    .map(|f| (ArrayBuilder::new(&f.data_type), f.nullable))
                    .collect(),
            },
            prim => BuilderKind::Primitive {
                width: prim.primitive_width().expect("primitive"),
                data: Vec::new(),
            },
        };
        Self {
            data_type: data_type.clone(),
            validity: Bitmap::new(),
            null_count: 0,
            kind,
        }
    }

    pub fn data_type(&self) -> &DataType {
        &self.data_type
    }

    pub fn len(&self) -> usize {
        self.validity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends a null slot. Children of a null struct receive nulls (or
    /// placeholder values when they are not nullable).
    pub fn push_null(&mut self) {
        self.fill_slot();
        self.validity.push(false);
        self.null_count += 1;
    }

    /// Appends a valid zero / empty value.
    pub fn push_default(&mut self) {
        self.fill_slot();
        self.validity.push(true);
    }

    fn fill_slot(&mut self) {
        match &mut self.kind {
            BuilderKind::Primitive { width, data } => data.resize(data.len() + *width, 0),
            BuilderKind::Bytes { offsets, data } => offsets.push(data.len() as u64),
            BuilderKind::List { offsets, child, .. } => offsets.push(child.len() as u64),
            BuilderKind::Fsl { dim, width, data, .. } => {
                data.resize(data.len() + *dim * *width, 0)
            }
            BuilderKind::Struct { children } => {
                for (child, nullable) in children {
                    if *nullable {
                        child.push_null();
                    } else {
                        child.push_default();
                    }
                }
            }
        }
    }

    /// Appends a valid fixed-width value (primitive or fixed-size-list) from
    /// its little-endian bytes.
    pub fn push_fixed(&mut self, bytes: &[u8]) -> Result<()> {
        match &mut self.kind {
            BuilderKind::Primitive { width, data } if bytes.len() == *width => {
                data.extend_from_slice(bytes)
            }
            BuilderKind::Fsl { dim, width, data, .. } if bytes.len() == *dim * *width => {
                data.extend_from_slice(bytes)
            }
            _ => {
                return Err(Error::invalid(format!(
                    "cannot push {} fixed bytes into {}",
                    bytes.len(),
                    self.data_type
                )))
            }
        }
        self.validity.push(true);
        Ok(())
    }

    /// Appends a valid Utf8/Binary value.
    pub fn push_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        match &mut self.kind {
            BuilderKind::Bytes { offsets, data } => {
                data.extend_from_slice(bytes);
                offsets.push(data.len() as u64);
            }
            _ => {
                return Err(Error::invalid(format!(
                    "cannot push bytes into {}",
                    self.data_type
                )))
            }
        }
        self.validity.push(true);
        Ok(())
    }

    /// Child builder of a list; push items then call [`Self::finish_list`].
    pub fn list_child(&mut self) -> &mut ArrayBuilder {
        match &mut self.kind {
            BuilderKind::List { child, .. } => child,
            _ => panic!("list_child on {}", self.data_type),
        }
    }

    /// Closes the current list slot (valid) at the child's current length.
    pub fn finish_list(&mut self) {
        match &mut self.kind {
            BuilderKind::List { offsets, child, .. } => offsets.push(child.len() as u64),
            _ => panic!("finish_list on {}", self.data_type),
        }
        self.validity.push(true);
    }

    pub fn struct_child(&mut self, i: usize) -> &mut ArrayBuilder {
        match &mut self.kind {
            BuilderKind::Struct { children } => &mut children[i].0,
            _ => panic!("struct_child on {}", self.data_type),
        }
    }

    pub fn struct_child_count(&self) -> usize {
        match &self.kind {
            BuilderKind::Struct { children } => children.len(),
            _ => 0,
        }
    }

    /// Marks a struct slot valid; the caller has pushed one value to every child.
    pub fn finish_struct(&mut self) {
        assert!(matches!(self.kind, BuilderKind::Struct { .. }));
        self.validity.push(true);
    }

    pub fn push_value(&mut self, value: &Value) -> Result<()> {
        if value.is_null() {
            self.push_null();
            return Ok(());
        }
        match &mut self.kind {
            BuilderKind::Primitive { .. } => {
                let mut buf = Vec::with_capacity(8);
                value
                    .encode_primitive(&self.data_type, &mut buf)
                    .map_err(Error::InvalidArgument)?;
                self.push_fixed(&buf)
            }
            BuilderKind::Bytes { .. } => match value {
                Value::Bytes(b) => {
                    if self.data_type == DataType::Utf8 && std::str::from_utf8(b).is_err() {
                        return Err(Error::invalid("invalid utf-8 in Utf8 value"));
                    }
                    self.push_bytes(b)
                }
                other => Err(Error::invalid(format!("expected bytes, got {other:?}"))),
            },
            BuilderKind::Fsl { item, dim, width, .. } => match value {
                Value::List(items) if items.len() == *dim => {
                    let mut buf = Vec::with_capacity(*dim * *width);
                    for v in items {
                        v.encode_primitive(item, &mut buf)
                            .map_err(Error::InvalidArgument)?;
                    }
                    self.push_fixed(&buf)
                }
                other => Err(Error::invalid(format!(
                    "expected {dim} fixed-size-list items, got {other:?}"
                ))),
            },
            BuilderKind::List { child, child_nullable, .. } => match value {
                Value::List(items) => {
                    for v in items {
                        if v.is_null() && !*child_nullable {
                            return Err(Error::invalid("null item in non-nullable list child"));
                        }
                        child.push_value(v)?;
                    }
                    self.finish_list();
                    Ok(())
                }
                other => Err(Error::invalid(format!("expected list, got {other:?}"))),
            },
            BuilderKind::Struct { children } => match value {
                Value::Struct(vals) if vals.len() == children.len() => {
                    for ((child, nullable), v) in children.iter_mut().zip(vals) {
                        if v.is_null() && !*nullable {
                            return Err(Error::invalid("null in non-nullable struct field"));
                        }
                        child.push_value(v)?;
                    }
                    self.finish_struct();
                    Ok(())
                }
                other => Err(Error::invalid(format!(
                    "expected struct of {} fields, got {other:?}",
                    children.len()
                ))),
            },
        }
    }

    pub fn finish(self) -> LogicalArray {
        let len = self.validity.len();
        let validity = (self.null_count > 0).then_some(self.validity);
        let payload = match self.kind {
            BuilderKind::Primitive { data, .. } => Payload::Primitive(data),
            BuilderKind::Bytes { offsets, data } => Payload::Bytes { offsets, data },
            BuilderKind::List { offsets, child, .. } => Payload::List {
                offsets,
                child: Box::new(child.finish()),
            },
            BuilderKind::Fsl { item, dim, data, .. } => {
                let child = LogicalArray::from_parts(item, len * dim, None, Payload::Primitive(data));
                Payload::FixedSizeList(Box::new(child))
            }
            BuilderKind::Struct { children } => {
                Payload::Struct(children.into_iter().map(|(c, _)| c.finish()).collect())
            }
        };
        LogicalArray::from_parts(self.data_type, len, validity, payload)
    }
}
