// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Logical data model: types, nested arrays, and row values.

mod bitmap;
mod builder;
mod datatype;
mod leaf;
mod logical;
mod value;

pub use bitmap::Bitmap;
pub use builder::ArrayBuilder;
pub use datatype::{DataType, Field};
pub use leaf::LeafValues;
pub use logical::{AvgValueWidth, LogicalArray, Payload, Violation, SERIALIZED_OFFSET_WIDTH};
pub use value::Value;
