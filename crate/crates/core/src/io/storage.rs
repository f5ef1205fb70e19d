// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Byte-addressed storage backends.

use std::fs::File;
use std::os::unix::fs::FileExt;
use std::path::Path;

use bytes::Bytes;

use crate::{Error, Result};

/// Positional reads over an immutable byte store.
pub trait Storage: Send + Sync + std::fmt::Debug {
    fn len(&self) -> u64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fills `buf` from `offset`. The caller checks bounds.
    fn read_at(&self, offset: u64, buf: &mut [u8]) -> Result<()>;
}

/// Storage over an in-memory buffer.
#[derive(Debug, Clone)]
pub struct MemoryStorage {
    data: Bytes,
}

impl MemoryStorage {
    pub fn new(data: impl Into<Bytes>) -> Self {
        Self { data: data.into() }
    }
}

impl Storage for MemoryStorage {
    fn len(&self) -> u64 {
        self.data.len() as u64
    }

    fn read_at(&self, offset: u64, buf: &mut [u8]) -> Result<()> {
        let start = offset as usize;
        buf.copy_from_slice(&self.data[start..start + buf.len()]);
        Ok(())
    }
}

/// Storage over a local file using positional reads.
///
/// With `bypass_cache` the file's pages are evicted from the OS page cache
/// when opened and after every read (`posix_fadvise(DONTNEED)`), so repeated
/// reads go to the device. Dirty pages are not evicted, so files should be
/// synced first. Where the call is unavailable the benchmarks are cache-warm.
#[derive(Debug)]
pub struct FileStorage {
    file: File,
    len: u64,
    bypass_cache: bool,
}

impl FileStorage {
    pub fn open(path: impl AsRef<Path>, bypass_cache: bool) -> Result<Self> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let storage = Self { file, len, bypass_cache };
        if bypass_cache {
            storage.drop_cache(0, 0);
        }
        Ok(storage)
    }

    fn drop_cache(&self, offset: u64, len: u64) {
        use std::os::fd::AsRawFd;
        // SAFETY: the descriptor is owned by `self.file` and stays open for
        // the duration of the call; fadvise does not touch memory we own.
        unsafe {
            libc::posix_fadvise(
                self.file.as_raw_fd(),
                offset as libc::off_t,
                len as libc::off_t,
                libc::POSIX_FADV_DONTNEED,
            );
        }
    }
}

impl Storage for FileStorage {
    fn len(&self) -> u64 {
        self.len
    }

    fn read_at(&self, offset: u64, buf: &mut [u8]) -> Result<()> {
        self.file.read_exact_at(buf, offset).map_err(Error::Io)?;
        if self.bypass_cache {
            self.drop_cache(offset, buf.len() as u64);
        }
        Ok(())
    }
}
