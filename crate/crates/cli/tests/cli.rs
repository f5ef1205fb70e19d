// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn zipcol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zipcol")).args(args).output().expect("run zipcol")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Runs a command that must succeed and parses its JSON output.
fn json(args: &[&str]) -> Value {
    let out = zipcol(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn first(v: Value) -> Value {
    v.as_array().expect("array")[0].clone()
}

fn u(v: &Value, key: &str) -> u64 {
    v[key].as_u64().unwrap_or_else(|| panic!("{key} in {v}"))
}

fn generate(path: &Path, extra: &[&str]) -> Value {
    let p = path.to_str().unwrap();
    let mut args = vec!["generate", p, "--out", "json"];
    args.extend_from_slice(extra);
    first(json(&args))
}

#[test]
fn generate_routes_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let scalar = generate(&dir.path().join("s.zcf"), &["--scenario", "scalar", "--rows", "100000"]);
    assert_eq!(scalar["encoding"], "miniblock");
    assert_eq!(u(&scalar, "rows"), 100_000);
    let vector = generate(&dir.path().join("v.zcf"), &["--scenario", "vector", "--rows", "10000"]);
    assert_eq!(vector["encoding"], "fullzip");
    assert_eq!(u(&vector, "cache_bytes"), 0);
    let images = generate(
        &dir.path().join("il.zcf"),
        &["--scenario", "image-list", "--rows", "60", "--null-fraction", "0"],
    );
    let per_row = u(&images, "data_bytes") as f64 / 60.0;
    assert!((80.0 * 1024.0..120.0 * 1024.0).contains(&per_row), "{per_row} bytes per row");
}

#[test]
fn inspect_agrees_with_generate() {
    let dir = tempfile::tempdir().unwrap();
    for (scenario, rows) in [("scalar", "50000"), ("string-list", "20000"), ("image", "200")] {
        let path = dir.path().join(format!("{scenario}.zcf"));
        let written = generate(&path, &["--scenario", scenario, "--rows", rows, "--page-bytes", "65536"]);
        let file = json(&["inspect", path.to_str().unwrap(), "--out", "json"]);
        assert_eq!(u(&file, "file_bytes"), u(&written, "file_bytes"));
        assert_eq!(u(&file, "data_bytes"), u(&written, "data_bytes"));
        assert_eq!(u(&file, "cache_bytes"), u(&written, "cache_bytes"));
        assert_eq!(u(&file, "metadata_bytes"), u(&written, "metadata_bytes"));
        assert_eq!(file["encoding"], written["encoding"]);
        let pages = file["columns"][0]["pages"].as_array().unwrap();
        assert_eq!(pages.len() as u64, u(&written, "pages"));
        let chunks: u64 = pages.iter().map(|p| u(p, "chunks")).sum();
        assert_eq!(chunks, u(&written, "chunks"));
    }
}

#[test]
fn inspect_text_dumps_chunks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.zcf");
    generate(&path, &["--scenario", "string", "--rows", "10000"]);
    let out = zipcol(&["inspect", path.to_str().unwrap(), "--chunks", "1"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("miniblock"), "{text}");
    assert!(text.contains("values per chunk"), "{text}");
    // nullable strings: definition levels, lengths and bytes
    assert!(text.contains("chunk 0: 3 buffers"), "{text}");
}

#[test]
fn generation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..3).map(|i| dir.path().join(format!("{i}.zcf"))).collect();
    for (path, seed) in paths.iter().zip(["5", "5", "6"]) {
        generate(path, &["--scenario", "string-list", "--rows", "5000", "--seed", seed]);
    }
    let bytes: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(bytes[0], bytes[1]);
    assert_ne!(bytes[0], bytes[2]);
}

#[test]
fn fixed_full_zip_takes_one_iop_per_row() {
    // one row per take, so each batch touches exactly one distinct row
    let record = first(json(&[
        "take", "--scenario", "vector", "--rows", "3000", "--k", "1", "--batches", "40", "--coalesce", "off", "--out",
        "json",
    ]));
    assert_eq!(record["encoding"], "fullzip");
    assert_eq!(u(&record, "iops"), 40);
    assert_eq!(u(&record, "planned_iops"), 40);
}

#[test]
fn variable_full_zip_takes_at_most_two_iops_per_row() {
    let record = first(json(&[
        "take", "--scenario", "image", "--rows", "300", "--k", "1", "--batches", "40", "--coalesce", "off", "--out",
        "json",
    ]));
    assert_eq!(record["encoding"], "fullzip");
    assert!(u(&record, "iops") <= 80);
    assert_eq!(u(&record, "iops"), u(&record, "planned_iops"));
}

#[test]
fn arrow_list_of_strings_takes_four_iops_per_row() {
    // list validity, list offsets, string offsets, string bytes; the
    // scenario's items are non-null so there is no item bitmap
    let record = first(json(&[
        "take", "--scenario", "string-list", "--rows", "5000", "--encoding", "arrow", "--k", "1", "--batches", "30",
        "--coalesce", "off", "--out", "json",
    ]));
    assert_eq!(record["encoding"], "arrow-baseline");
    assert_eq!(u(&record, "iops"), 120);
}

#[test]
fn miniblock_takes_at_most_one_iop_per_row() {
    for scenario in ["scalar", "string", "scalar-list", "string-list"] {
        let record = first(json(&[
            "take", "--scenario", scenario, "--rows", "20000", "--k", "64", "--batches", "8", "--coalesce", "off",
            "--out", "json",
        ]));
        assert_eq!(record["encoding"], "miniblock", "{scenario}");
        assert!(u(&record, "iops") <= 64 * 8, "{scenario}");
        assert!(u(&record, "largest_read") <= 8192 + 64, "{scenario}");
        assert!(u(&record, "cache_bytes") > 0, "{scenario}");
    }
}

#[test]
fn take_counts_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.zcf");
    generate(&path, &["--scenario", "string", "--rows", "50000"]);
    let p = path.to_str().unwrap();
    let run = |workers: &str| {
        first(json(&[
            "take", p, "--k", "32", "--batches", "24", "--workers", workers, "--seed", "9", "--coalesce", "off", "--out",
            "json",
        ]))
    };
    let (one, four) = (run("1"), run("4"));
    for key in ["iops", "bytes_read", "useful_bytes", "sectors_touched"] {
        assert_eq!(u(&one, key), u(&four, key), "{key}");
    }
    assert_eq!(u(&four, "workers"), 4);
}

#[test]
fn coalescing_never_adds_iops() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.zcf");
    generate(&path, &["--scenario", "vector", "--rows", "2000"]);
    let p = path.to_str().unwrap();
    let run = |coalesce: &str, gap: &str| {
        first(json(&["take", p, "--k", "512", "--batches", "4", "--coalesce", coalesce, "--max-gap", gap, "--out", "json"]))
    };
    let off = run("off", "4096");
    let on = run("on", "4096");
    assert!(u(&on, "iops") < u(&off, "iops"));
    assert!(u(&on, "coalesced_merges") > 0);
    assert_eq!(u(&on, "useful_bytes"), u(&off, "useful_bytes"));
}

#[test]
fn arrow_takes_with_coalescing_pass_their_checks() {
    for scenario in ["string-list", "scalar-list", "image-list"] {
        let on = first(json(&[
            "take", "--scenario", scenario, "--rows", "3000", "--encoding", "arrow", "--k", "64", "--batches", "10",
            "--seed", "1", "--out", "json",
        ]));
        assert_eq!(u(&on, "iops"), u(&on, "planned_iops"), "{scenario}");
    }
}

#[test]
fn full_zip_scan_skips_the_repetition_index() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("img.zcf");
    generate(&path, &["--scenario", "image", "--rows", "300", "--page-bytes", "1048576"]);
    let p = path.to_str().unwrap();
    let file = json(&["inspect", p, "--out", "json"]);
    let pages = file["columns"][0]["pages"].as_array().unwrap();
    assert!(pages.len() > 1);
    let span: u64 = pages.iter().map(|pg| u(pg, "data_bytes")).sum();
    let index: u64 = pages.iter().map(|pg| u(pg, "index_bytes")).sum();
    assert!(index > 0);
    let scan = first(json(&["scan", p, "--coalesce", "off", "--out", "json"]));
    assert_eq!(u(&scan, "iops"), pages.len() as u64);
    // page spans hold the index, the data and at most 7 bytes of padding each
    let useful = u(&scan, "useful_bytes");
    assert!(useful + index <= span && span <= useful + index + 7 * 2 * pages.len() as u64);
}

#[test]
fn scan_csv_has_stable_header() {
    let out = zipcol(&["scan", "--scenario", "scalar", "--rows", "1000"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,encoding,workload,rows,k,batches,workers,coalesce,iops,planned_iops,bytes_read,useful_bytes,\
         read_amplification,sectors_touched,coalesced_merges,largest_read,rows_per_second,elapsed_seconds,cache_bytes"
    );
    assert!(lines.next().unwrap().starts_with("scalar,miniblock,scan,1000,"));
    assert!(lines.next().is_none());
}

#[test]
fn coalesce_model_points() {
    let records = json(&["coalesce-model", "--out", "json"]);
    let find = |rows: u64, bytes: u64| {
        records
            .as_array()
            .unwrap()
            .iter()
            .find(|r| u(r, "rows") == rows && u(r, "value_bytes") == bytes)
            .cloned()
            .unwrap()
    };
    // P = 1,953,125 pages; birthday estimate k - k^2 / 2P = 97,440
    let big = find(4_000_000_000, 4);
    let distinct = big["expected_distinct_pages"].as_f64().unwrap();
    assert!((97_000.0..98_000.0).contains(&distinct), "{distinct}");
    // 3 KiB rows at 10^5 rows: every page is touched
    let embeddings = find(100_000, 3072);
    let pages = u(&embeddings, "pages") as f64;
    assert!((embeddings["expected_distinct_pages"].as_f64().unwrap() - pages).abs() < 1e-6 * pages);
    let single = first(json(&["coalesce-model", "--k", "1", "--rows", "1000000", "--value-bytes", "16", "--out", "json"]));
    assert!((single["expected_distinct_pages"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.zcf");
    let written = generate(&path, &["--scenario", "scalar", "--rows", "0"]);
    assert_eq!(u(&written, "rows"), 0);
    assert_eq!(u(&written, "pages"), 0);
    let p = path.to_str().unwrap();
    let file = json(&["inspect", p, "--out", "json"]);
    assert_eq!(u(&file, "rows"), 0);
    assert_eq!(u(&file, "data_bytes"), 0);
    assert_eq!(code(&zipcol(&["scan", p])), 0);
    assert_eq!(code(&zipcol(&["take", p])), 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.zcf");
    generate(&path, &["--scenario", "scalar", "--rows", "1000"]);
    let p = path.to_str().unwrap();
    assert_eq!(code(&zipcol(&["--help"])), 0);
    assert_eq!(code(&zipcol(&["take", p, "--encoding", "full-zip"])), 2);
    assert_eq!(code(&zipcol(&["take", p, "--encoding", "miniblock", "--batches", "2"])), 0);
    assert_eq!(code(&zipcol(&["take", "--bogus"])), 1);
    assert_eq!(code(&zipcol(&["generate", p, "--scenario", "nope"])), 1);
    assert_eq!(code(&zipcol(&["scan", dir.path().join("missing").to_str().unwrap()])), 1);
    std::fs::write(dir.path().join("junk"), b"not a zipcol file at all, just bytes").unwrap();
    assert_eq!(code(&zipcol(&["inspect", dir.path().join("junk").to_str().unwrap()])), 1);
}
