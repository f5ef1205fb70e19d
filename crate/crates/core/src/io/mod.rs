// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Storage access with exact IOP and byte accounting.
//!
//! Every batch of [`ReadRequest`]s goes through [`IoEngine::submit`], which
//! optionally merges nearby requests and counts each read it issues as one
//! IOP. Zero-length requests are answered without touching storage and are
//! not counted.

pub mod model;
mod storage;

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use bytes::Bytes;

pub use model::expected_distinct_pages;
pub use storage::{FileStorage, MemoryStorage, Storage};

use crate::{Error, Result};

pub const SECTOR_BYTES: u64 = 4096;

/// What a read is for; used in traces and plans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReadTag {
    Metadata,
    SearchCache,
    RepIndex,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadRequest {
    pub offset: u64,
    pub length: u64,
    pub tag: ReadTag,
}

impl ReadRequest {
    pub fn new(range: Range<u64>, tag: ReadTag) -> Self {
        Self { offset: range.start, length: range.end - range.start, tag }
    }

    pub fn end(&self) -> u64 {
        self.offset + self.length
    }
}

/// When to merge requests into a single read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoalescePolicy {
    pub enabled: bool,
    /// Requests separated by at most this many bytes are merged.
    pub max_gap: u64,
    /// Merged reads never exceed this length.
    pub max_merged: u64,
}

impl Default for CoalescePolicy {
    fn default() -> Self {
        Self { enabled: true, max_gap: 4096, max_merged: 1 << 20 }
    }
}

impl CoalescePolicy {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }
}

/// Counters since the engine was created or last reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IoStats {
    pub iops: u64,
    pub bytes_read: u64,
    /// Requested bytes, before merging.
    pub useful_bytes: u64,
    pub requests: u64,
    pub coalesced_merges: u64,
    pub sectors_touched: u64,
    /// Length of the largest single read.
    pub largest_read: u64,
}

impl IoStats {
    pub fn read_amplification(&self) -> f64 {
        if self.useful_bytes == 0 {
            1.0
        } else {
            self.bytes_read as f64 / self.useful_bytes as f64
        }
    }

    pub fn since(&self, earlier: &IoStats) -> IoStats {
        IoStats {
            iops: self.iops - earlier.iops,
            bytes_read: self.bytes_read - earlier.bytes_read,
            useful_bytes: self.useful_bytes - earlier.useful_bytes,
            requests: self.requests - earlier.requests,
            coalesced_merges: self.coalesced_merges - earlier.coalesced_merges,
            sectors_touched: self.sectors_touched - earlier.sectors_touched,
            // a maximum cannot be differenced; keep the later value
            largest_read: self.largest_read,
        }
    }
}

#[derive(Debug, Default)]
struct Counters {
    iops: AtomicU64,
    bytes_read: AtomicU64,
    useful_bytes: AtomicU64,
    requests: AtomicU64,
    coalesced_merges: AtomicU64,
    sectors_touched: AtomicU64,
    largest_read: AtomicU64,
}

/// Plans the reads that would be issued for `requests`: merged byte ranges
/// plus, for each request, the index of the read that serves it.
pub fn plan_reads(requests: &[ReadRequest], policy: &CoalescePolicy) -> (Vec<Range<u64>>, Vec<Option<usize>>) {
    let mut order: Vec<usize> = (0..requests.len()).filter(|i| requests[*i].length > 0).collect();
    order.sort_by_key(|i| (requests[*i].offset, requests[*i].length));
    let mut reads: Vec<Range<u64>> = Vec::new();
    let mut serving = vec![None; requests.len()];
    for i in order {
        let r = &requests[i];
        if let Some(last) = reads.last_mut() {
            let merged_end = last.end.max(r.end());
            let mergeable = policy.enabled
                && r.offset <= last.end + policy.max_gap
                && merged_end - last.start <= policy.max_merged;
            if mergeable {
                last.end = merged_end;
                serving[i] = Some(reads.len() - 1);
                continue;
            }
        }
        reads.push(r.offset..r.end());
        serving[i] = Some(reads.len() - 1);
    }
    (reads, serving)
}

fn sectors(range: &Range<u64>) -> u64 {
    (range.end - 1) / SECTOR_BYTES - range.start / SECTOR_BYTES + 1
}

/// Counting front end over a [`Storage`]. Cheap to clone; clones share
/// counters.
#[derive(Debug, Clone)]
pub struct IoEngine {
    storage: Arc<dyn Storage>,
    policy: CoalescePolicy,
    counters: Arc<Counters>,
}

impl IoEngine {
    pub fn new(storage: Arc<dyn Storage>, policy: CoalescePolicy) -> Self {
        Self { storage, policy, counters: Arc::default() }
    }

    pub fn in_memory(data: impl Into<Bytes>, policy: CoalescePolicy) -> Self {
        Self::new(Arc::new(MemoryStorage::new(data)), policy)
    }

    /// An engine over the same storage with its own counters.
    pub fn fork(&self, policy: CoalescePolicy) -> Self {
        Self { storage: self.storage.clone(), policy, counters: Arc::default() }
    }

    pub fn policy(&self) -> CoalescePolicy {
        self.policy
    }

    pub fn len(&self) -> u64 {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Number of reads [`Self::submit`] would issue.
    pub fn planned_iops(&self, requests: &[ReadRequest]) -> u64 {
        plan_reads(requests, &self.policy).0.len() as u64
    }

    /// Executes `requests`, returning their bytes in request order.
    pub fn submit(&self, requests: &[ReadRequest]) -> Result<Vec<Bytes>> {
        let len = self.storage.len();
        for r in requests {
            if r.end() > len || r.end() < r.offset {
                return Err(Error::OutOfRange { index: r.end(), len });
            }
        }
        let (reads, serving) = plan_reads(requests, &self.policy);
        let mut buffers = Vec::with_capacity(reads.len());
        for range in &reads {
            let mut buf = vec![0u8; (range.end - range.start) as usize];
            self.storage.read_at(range.start, &mut buf)?;
            buffers.push(Bytes::from(buf));
        }

        let c = &self.counters;
        let non_empty = serving.iter().filter(|s| s.is_some()).count() as u64;
        c.iops.fetch_add(reads.len() as u64, Ordering::Relaxed);
        c.requests.fetch_add(non_empty, Ordering::Relaxed);
        c.coalesced_merges.fetch_add(non_empty - reads.len() as u64, Ordering::Relaxed);
        c.bytes_read.fetch_add(reads.iter().map(|r| r.end - r.start).sum(), Ordering::Relaxed);
        c.useful_bytes.fetch_add(requests.iter().map(|r| r.length).sum(), Ordering::Relaxed);
        c.sectors_touched.fetch_add(reads.iter().map(sectors).sum(), Ordering::Relaxed);
        c.largest_read.fetch_max(reads.iter().map(|r| r.end - r.start).max().unwrap_or(0), Ordering::Relaxed);

        Ok(requests
            .iter()
            .zip(serving)
            .map(|(r, s)| match s {
                Some(i) => {
                    let start = (r.offset - reads[i].start) as usize;
                    buffers[i].slice(start..start + r.length as usize)
                }
                None => Bytes::new(),
            })
            .collect())
    }

    /// Reads one range.
    pub fn read(&self, range: Range<u64>, tag: ReadTag) -> Result<Bytes> {
        Ok(self.submit(&[ReadRequest::new(range, tag)])?.remove(0))
    }

    pub fn stats(&self) -> IoStats {
        let c = &self.counters;
        IoStats {
            iops: c.iops.load(Ordering::Relaxed),
            bytes_read: c.bytes_read.load(Ordering::Relaxed),
            useful_bytes: c.useful_bytes.load(Ordering::Relaxed),
            requests: c.requests.load(Ordering::Relaxed),
            coalesced_merges: c.coalesced_merges.load(Ordering::Relaxed),
            sectors_touched: c.sectors_touched.load(Ordering::Relaxed),
            largest_read: c.largest_read.load(Ordering::Relaxed),
        }
    }

    pub fn reset_stats(&self) {
        let c = &self.counters;
        for a in [&c.iops, &c.bytes_read, &c.useful_bytes, &c.requests, &c.coalesced_merges, &c.sectors_touched, &c.largest_read] {
            a.store(0, Ordering::Relaxed);
        }
    }
}
