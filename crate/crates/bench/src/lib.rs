// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Fixtures shared by the benchmarks: scenario files held in memory and
//! seeded row selections.

use rand::Rng;
use zipcol::datagen::{rng, Scenario};
use zipcol::format::{write_file, ColumnOptions, EncodingChoice, FileReader, WriteOptions};
use zipcol::io::{CoalescePolicy, IoEngine};

/// Rows per scenario, small enough for a benchmark run to set up quickly.
pub fn bench_rows(scenario: Scenario) -> usize {
    scenario.default_rows() / 10
}

/// Encodes `scenario` into an in-memory file.
pub fn scenario_file(scenario: Scenario, encoding: EncodingChoice) -> zipcol::Result<Vec<u8>> {
    let array = scenario.generate(bench_rows(scenario), 0.1, 42);
    let options = WriteOptions::default().with_default(ColumnOptions { encoding, ..Default::default() });
    Ok(write_file(&[(scenario.field(), array)], &options)?.0)
}

/// Opens `bytes` with warmed search caches and coalescing disabled.
pub fn open(bytes: Vec<u8>) -> FileReader {
    FileReader::open(IoEngine::in_memory(bytes, CoalescePolicy::disabled())).expect("fixture files are valid")
}

/// `k` sorted random row indices below `rows`.
pub fn random_rows(seed: u64, k: usize, rows: u64) -> Vec<u64> {
    let mut r = rng(seed);
    let mut out: Vec<u64> = (0..k).map(|_| r.gen_range(0..rows)).collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_round_trip() {
        let bytes = scenario_file(Scenario::String, EncodingChoice::Auto).unwrap();
        let reader = open(bytes);
        let rows = random_rows(1, 16, reader.row_count());
        assert_eq!(reader.take(&["string"], &rows).unwrap()[0].len(), 16);
    }
}
