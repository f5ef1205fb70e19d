// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid array: {0}")]
    InvalidArray(String),

    #[error("corrupt data at byte {offset}: {message}")]
    Corrupt { offset: u64, message: String },

    #[error("illegal codec: {0}")]
    IllegalCodec(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: u64, len: u64 },

    /// A value is too large for the miniblock encoding and should have been
    /// routed to full-zip.
    #[error("routing error: {0}")]
    Routing(String),

    #[error("undefined width: {0}")]
    UndefinedWidth(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn corrupt(offset: u64, message: impl Into<String>) -> Self {
        Self::Corrupt {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Self::InvalidArgument(message.into())
    }
}
