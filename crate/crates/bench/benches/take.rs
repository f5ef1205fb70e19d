// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Random access: 256 rows per take under each layout.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use zipcol::datagen::Scenario;
use zipcol::format::EncodingChoice;
use zipcol_bench::{open, random_rows, scenario_file};

const K: usize = 256;

fn take(c: &mut Criterion) {
    let mut group = c.benchmark_group("take");
    group.throughput(Throughput::Elements(K as u64));
    for scenario in Scenario::ALL {
        for encoding in [EncodingChoice::Auto, EncodingChoice::Arrow] {
            let reader = open(scenario_file(scenario, encoding).expect("fixture"));
            let name = scenario.name();
            let mut seed = 0;
            group.bench_function(BenchmarkId::new(name, encoding), |b| {
                b.iter(|| {
                    seed += 1;
                    let rows = random_rows(seed, K, reader.row_count());
                    reader.take(&[name], &rows).expect("take")
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, take);
criterion_main!(benches);
