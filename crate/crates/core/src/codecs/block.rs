// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! General-purpose block compression behind a one-byte algorithm tag.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockAlgorithm {
    /// Stores bytes as-is.
    Identity,
    /// Byte run-length encoding: `(run length 1..=255, byte)` pairs.
    RunLength,
    /// Reserved tag; no implementation ships.
    Lz4,
    /// Reserved tag; no implementation ships.
    Zstd,
}

impl BlockAlgorithm {
    pub fn tag(self) -> u8 {
        match self {
            BlockAlgorithm::Identity => 0,
            BlockAlgorithm::RunLength => 1,
            BlockAlgorithm::Lz4 => 2,
            BlockAlgorithm::Zstd => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => BlockAlgorithm::Identity,
            1 => BlockAlgorithm::RunLength,
            2 => BlockAlgorithm::Lz4,
            3 => BlockAlgorithm::Zstd,
            other => return Err(Error::corrupt(0, format!("unknown block algorithm tag {other}"))),
        })
    }

    pub fn compress(self, input: &[u8], out: &mut Vec<u8>) -> Result<()> {
        match self {
            BlockAlgorithm::Identity => out.extend_from_slice(input),
            BlockAlgorithm::RunLength => {
                let mut i = 0;
                while i < input.len() {
                    let b = input[i];
                    let mut run = 1;
                    while run < 255 && i + run < input.len() && input[i + run] == b {
                        run += 1;
                    }
                    out.push(run as u8);
                    out.push(b);
                    i += run;
                }
            }
            other => return Err(Error::Unsupported(format!("block algorithm {other:?} is reserved"))),
        }
        Ok(())
    }

    pub fn decompress(self, input: &[u8], out: &mut Vec<u8>) -> Result<()> {
        match self {
            BlockAlgorithm::Identity => out.extend_from_slice(input),
            BlockAlgorithm::RunLength => {
                if !input.len().is_multiple_of(2) {
                    return Err(Error::corrupt(input.len() as u64, "run-length stream has odd length"));
                }
                for (k, pair) in input.chunks_exact(2).enumerate() {
                    if pair[0] == 0 {
                        return Err(Error::corrupt((2 * k) as u64, "zero-length run"));
                    }
                    out.extend(std::iter::repeat_n(pair[1], pair[0] as usize));
                }
            }
            other => return Err(Error::Unsupported(format!("block algorithm {other:?} is reserved"))),
        }
        Ok(())
    }
}
