// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Full scans of each scenario under each layout.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use zipcol::datagen::Scenario;
use zipcol::format::EncodingChoice;
use zipcol_bench::{open, scenario_file};

fn scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("scan");
    group.sample_size(10);
    for scenario in Scenario::ALL {
        for encoding in [EncodingChoice::Auto, EncodingChoice::Arrow] {
            let bytes = scenario_file(scenario, encoding).expect("fixture");
            group.throughput(Throughput::Bytes(bytes.len() as u64));
            let reader = open(bytes);
            let name = scenario.name();
            group.bench_function(BenchmarkId::new(name, encoding), |b| b.iter(|| reader.scan(&[name]).expect("scan")));
        }
    }
    group.finish();
}

criterion_group!(benches, scan);
criterion_main!(benches);
