// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! A columnar file format with adaptive structural encodings.
//!
//! Leaf columns whose values average at least 128 bytes are stored with the
//! full-zip encoding (row-major records of control word, length and value,
//! plus a byte-offset repetition index). Smaller values use the miniblock
//! encoding (independently decodable chunks of a few KiB described by
//! 2-byte metadata words that are cached in memory).

pub mod array;
pub mod arrow;
pub mod codecs;
pub mod datagen;
pub mod error;
pub mod format;
pub mod fullzip;
pub mod io;
pub mod miniblock;
pub mod repdef;
pub mod wire;

pub use array::{DataType, Field, LogicalArray, Value};
pub use error::{Error, Result};
