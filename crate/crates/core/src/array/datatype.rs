// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use std::collections::HashSet;
use std::fmt;

/// Logical type of a column or nested child.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DataType {
    UInt8,
    UInt16,
    UInt32,
    UInt64,
    Int8,
    Int16,
    Int32,
    Int64,
    Float32,
    Float64,
    Binary,
    Utf8,
    /// Fixed-size list of non-nullable primitive items.
    ///
    /// Treated as a single fixed-width leaf by the structural encodings.
    FixedSizeList(Box<DataType>, u32),
    List(Box<Field>),
    Struct(Vec<Field>),
}

/// A named, possibly nullable, child of a struct or list (or a top-level column).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Field {
    pub name: String,
    pub data_type: DataType,
    pub nullable: bool,
}

impl Field {
    pub fn new(name: impl Into<String>, data_type: DataType, nullable: bool) -> Self {
        Self {
            name: name.into(),
            data_type,
            nullable,
        }
    }
}

impl DataType {
    pub fn list(item: DataType, item_nullable: bool) -> Self {
        Self::List(Box::new(Field::new("item", item, item_nullable)))
    }

    pub fn fixed_size_list(item: DataType, dimension: u32) -> Self {
        Self::FixedSizeList(Box::new(item), dimension)
    }

    pub fn is_primitive(&self) -> bool {
        self.primitive_width().is_some()
    }

    /// Byte width of a primitive type.
    pub fn primitive_width(&self) -> Option<usize> {
        use DataType::*;
        match self {
            UInt8 | Int8 => Some(1),
            UInt16 | Int16 => Some(2),
            UInt32 | Int32 | Float32 => Some(4),
            UInt64 | Int64 | Float64 => Some(8),
            _ => None,
        }
    }

    /// Byte width of one value for types that are stored as fixed-width leaves
    /// (primitives and fixed-size lists).
    pub fn fixed_width(&self) -> Option<usize> {
        match self {
            DataType::FixedSizeList(child, dim) => {
                child.primitive_width().map(|w| w * *dim as usize)
            }
            other => other.primitive_width(),
        }
    }

    pub fn is_variable_width(&self) -> bool {
        matches!(self, DataType::Binary | DataType::Utf8)
    }

    /// True for types that become one leaf column when shredded.
    pub fn is_leaf(&self) -> bool {
        self.fixed_width().is_some() || self.is_variable_width()
    }

    pub fn is_signed_integer(&self) -> bool {
        use DataType::*;
        matches!(self, Int8 | Int16 | Int32 | Int64)
    }

    pub fn is_unsigned_integer(&self) -> bool {
        use DataType::*;
        matches!(self, UInt8 | UInt16 | UInt32 | UInt64)
    }

    pub fn is_float(&self) -> bool {
        matches!(self, DataType::Float32 | DataType::Float64)
    }

    /// Number of leaf columns this type shreds into.
    pub fn leaf_count(&self) -> usize {
        match self {
            DataType::List(child) => child.data_type.leaf_count(),
            DataType::Struct(fields) => fields.iter().map(|f| f.data_type.leaf_count()).sum(),
            _ => 1,
        }
    }

    /// Checks the structural invariants of the type itself.
    pub fn check(&self) -> Result<(), String> {
        match self {
            DataType::FixedSizeList(child, dim) => {
                if *dim == 0 {
                    return Err("fixed-size-list dimension must be >= 1".into());
                }
                if !child.is_primitive() {
                    return Err(format!(
                        "fixed-size-list child must be a primitive type, got {child}"
                    ));
                }
                Ok(())
            }
            DataType::List(child) => child.data_type.check(),
            DataType::Struct(fields) => {
                if fields.is_empty() {
                    return Err("struct must have at least one field".into());
                }
                let mut seen = HashSet::new();
                for f in fields {
                    if !seen.insert(f.name.as_str()) {
                        return Err(format!("duplicate struct field name '{}'", f.name));
                    }
                    f.data_type.check()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataType::UInt8 => write!(f, "UInt8"),
            DataType::UInt16 => write!(f, "UInt16"),
            DataType::UInt32 => write!(f, "UInt32"),
            DataType::UInt64 => write!(f, "UInt64"),
            DataType::Int8 => write!(f, "Int8"),
            DataType::Int16 => write!(f, "Int16"),
            DataType::Int32 => write!(f, "Int32"),
            DataType::Int64 => write!(f, "Int64"),
            DataType::Float32 => write!(f, "Float32"),
            DataType::Float64 => write!(f, "Float64"),
            DataType::Binary => write!(f, "Binary"),
            DataType::Utf8 => write!(f, "Utf8"),
            DataType::FixedSizeList(child, dim) => write!(f, "FSL<{child},{dim}>"),
            DataType::List(child) => write!(f, "List<{}>", child.data_type),
            DataType::Struct(fields) => {
                write!(f, "Struct<")?;
                for (i, field) in fields.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}: {}", field.name, field.data_type)?;
                }
                write!(f, ">")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(DataType::UInt64.fixed_width(), Some(8));
        assert_eq!(
            DataType::fixed_size_list(DataType::Float32, 768).fixed_width(),
            Some(3072)
        );
        assert_eq!(DataType::Utf8.fixed_width(), None);
        assert!(DataType::Binary.is_leaf());
        assert!(!DataType::list(DataType::UInt8, false).is_leaf());
    }

    #[test]
    fn check_rejects_bad_types() {
        assert!(DataType::fixed_size_list(DataType::Float32, 0).check().is_err());
        assert!(DataType::fixed_size_list(DataType::Utf8, 2).check().is_err());
        assert!(DataType::Struct(vec![]).check().is_err());
        let dup = DataType::Struct(vec![
            Field::new("a", DataType::UInt8, true),
            Field::new("a", DataType::UInt16, true),
        ]);
        assert!(dup.check().is_err());
    }

    #[test]
    fn leaf_count_counts_struct_leaves() {
        let dt = DataType::Struct(vec![
            Field::new("a", DataType::list(DataType::Utf8, true), true),
            Field::new(
                "b",
                DataType::Struct(vec![
                    Field::new("c", DataType::UInt8, false),
                    Field::new("d", DataType::Float64, false),
                ]),
                true,
            ),
        ]);
        assert_eq!(dt.leaf_count(), 3);
        assert_eq!(dt.to_string(), "Struct<a: List<Utf8>, b: Struct<c: UInt8, d: Float64>>");
    }
}
