// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! File container: pages of leaf columns, column metadata and footer.
//!
//! ```text
//! "ZCF1" 0 0 0 0 | page buffers (8-byte aligned) | metadata block | footer
//! ```

pub mod meta;
pub mod packed;
pub mod schema;

mod reader;
mod writer;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

pub use reader::{ColumnSummary, FileReader, PageSummary, Projection, TakeStats};
pub use writer::{write_file, ColumnReport, PageReport, WriteReport};

use crate::array::{AvgValueWidth, DataType, Field, LogicalArray, Payload};
use crate::codecs::CodecRequest;
use crate::{Error, Result};

/// Values averaging at least this many bytes per row use full-zip.
pub const FULL_ZIP_THRESHOLD: u64 = 128;
/// Target size of one page of one leaf column.
pub const DEFAULT_PAGE_BYTES: u64 = 8 << 20;

/// Layout of one page of a leaf column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructuralEncoding {
    FullZip,
    MiniBlock,
}

impl fmt::Display for StructuralEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructuralEncoding::FullZip => "full-zip",
            StructuralEncoding::MiniBlock => "miniblock",
        })
    }
}

/// Routes a page by its average value width; a tie goes to full-zip.
pub fn select_encoding(width: &AvgValueWidth) -> StructuralEncoding {
    if width.at_least(FULL_ZIP_THRESHOLD) {
        StructuralEncoding::FullZip
    } else {
        StructuralEncoding::MiniBlock
    }
}

/// Requested layout of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncodingChoice {
    /// Per page, by [`select_encoding`].
    #[default]
    Auto,
    FullZip,
    MiniBlock,
    /// Arrow-style baseline buffers.
    Arrow,
}

impl FromStr for EncodingChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "full-zip" | "fullzip" => Ok(Self::FullZip),
            "miniblock" | "mini-block" => Ok(Self::MiniBlock),
            "arrow" | "arrow-baseline" => Ok(Self::Arrow),
            other => Err(Error::invalid(format!(
                "unknown encoding '{other}' (expected auto, full-zip, miniblock or arrow)"
            ))),
        }
    }
}

impl fmt::Display for EncodingChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingChoice::Auto => "auto",
            EncodingChoice::FullZip => "full-zip",
            EncodingChoice::MiniBlock => "miniblock",
            EncodingChoice::Arrow => "arrow",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ColumnOptions {
    pub encoding: EncodingChoice,
    pub codec: CodecRequest,
    /// Store a struct of leaf fields as one packed leaf column.
    pub pack_struct: bool,
}

#[derive(Debug, Clone)]
pub struct WriteOptions {
    pub page_bytes: u64,
    /// Miniblock chunk budget, in buffer bytes.
    pub chunk_budget: usize,
    pub default_column: ColumnOptions,
    pub columns: HashMap<String, ColumnOptions>,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            page_bytes: DEFAULT_PAGE_BYTES,
            chunk_budget: crate::miniblock::DEFAULT_CHUNK_BUDGET,
            default_column: ColumnOptions::default(),
            columns: HashMap::new(),
        }
    }
}

impl WriteOptions {
    pub fn with_column(mut self, name: impl Into<String>, options: ColumnOptions) -> Self {
        self.columns.insert(name.into(), options);
        self
    }

    pub fn with_default(mut self, options: ColumnOptions) -> Self {
        self.default_column = options;
        self
    }

    pub fn column(&self, name: &str) -> ColumnOptions {
        self.columns.get(name).copied().unwrap_or(self.default_column)
    }
}

/// Struct child indices leading to each leaf, in depth-first order.
/// Lists do not consume an index.
pub fn leaf_struct_paths(data_type: &DataType) -> Vec<Vec<usize>> {
    match data_type {
        DataType::List(item) => leaf_struct_paths(&item.data_type),
        DataType::Struct(fields) => fields
            .iter()
            .enumerate()
            .flat_map(|(i, f)| {
                leaf_struct_paths(&f.data_type).into_iter().map(move |mut p| {
                    p.insert(0, i);
                    p
                })
            })
            .collect(),
        _ => vec![Vec::new()],
    }
}

/// Keeps only the struct children along `path`, so the payload of the
/// result is exactly the data of one leaf plus the offsets above it.
pub fn project_path(array: &LogicalArray, path: &[usize]) -> LogicalArray {
    let (dt, len, validity, payload) = array.clone().into_parts();
    match (dt, payload) {
        (DataType::List(item), Payload::List { offsets, child }) => {
            let child = project_path(&child, path);
            let item = Field::new(item.name, child.data_type().clone(), item.nullable);
            LogicalArray::from_parts(DataType::List(Box::new(item)), len, validity, Payload::List { offsets, child: Box::new(child) })
        }
        (DataType::Struct(fields), Payload::Struct(children)) if !path.is_empty() => {
            let i = path[0];
            let child = project_path(&children[i], &path[1..]);
            let f = Field::new(fields[i].name.clone(), child.data_type().clone(), fields[i].nullable);
            LogicalArray::from_parts(DataType::Struct(vec![f]), len, validity, Payload::Struct(vec![child]))
        }
        (dt, payload) => LogicalArray::from_parts(dt, len, validity, payload),
    }
}

/// A struct array reduced to its `child`-th field.
pub(crate) fn struct_subset(array: &LogicalArray, child: usize) -> Result<LogicalArray> {
    match array.data_type() {
        DataType::Struct(fields) => Ok(LogicalArray::from_parts(
            DataType::Struct(vec![fields[child].clone()]),
            array.len(),
            array.validity().cloned(),
            Payload::Struct(vec![array.children()[child].clone()]),
        )),
        dt => Err(Error::invalid(format!("{dt} has no children"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::Value;

    #[test]
    fn routing_threshold_ties_to_full_zip() {
        let w = |total_bytes, rows| AvgValueWidth { total_bytes, rows };
        assert_eq!(select_encoding(&w(128, 1)), StructuralEncoding::FullZip);
        assert_eq!(select_encoding(&w(127, 1)), StructuralEncoding::MiniBlock);
        assert_eq!(select_encoding(&w(40, 1)), StructuralEncoding::MiniBlock);
        assert_eq!(select_encoding(&w(255, 2)), StructuralEncoding::MiniBlock);
        assert_eq!(select_encoding(&w(256, 2)), StructuralEncoding::FullZip);
    }

    #[test]
    fn leaf_paths_skip_lists() {
        let dt = DataType::Struct(vec![
            Field::new("a", DataType::list(DataType::Utf8, true), true),
            Field::new(
                "b",
                DataType::list(
                    DataType::Struct(vec![
                        Field::new("c", DataType::UInt8, false),
                        Field::new("d", DataType::Float64, false),
                    ]),
                    true,
                ),
                true,
            ),
        ]);
        assert_eq!(leaf_struct_paths(&dt), vec![vec![0], vec![1, 0], vec![1, 1]]);
        assert_eq!(leaf_struct_paths(&DataType::UInt8), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn projection_keeps_one_leaf() {
        let dt = DataType::Struct(vec![
            Field::new("a", DataType::UInt64, false),
            Field::new("b", DataType::list(DataType::Utf8, false), false),
        ]);
        let rows = vec![
            Value::Struct(vec![Value::UInt(1), Value::List(vec![Value::from("xy")])]),
            Value::Struct(vec![Value::UInt(2), Value::List(vec![])]),
        ];
        let arr = LogicalArray::from_values(&dt, &rows).unwrap();
        let a = project_path(&arr, &[0]);
        assert_eq!(a.avg_value_width().unwrap().total_bytes, 16);
        let b = project_path(&arr, &[1]);
        // list offsets 3*4 + string offsets 2*4 + 2 data bytes
        assert_eq!(b.avg_value_width().unwrap().total_bytes, 22);
        assert_eq!(b.value(0), Value::Struct(vec![Value::List(vec![Value::from("xy")])]));
    }

    #[test]
    fn encoding_names_parse() {
        for e in [EncodingChoice::Auto, EncodingChoice::FullZip, EncodingChoice::MiniBlock, EncodingChoice::Arrow] {
            assert_eq!(e.to_string().parse::<EncodingChoice>().unwrap(), e);
        }
        assert!("zip".parse::<EncodingChoice>().is_err());
    }
}
