// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Expected number of distinct disk pages touched by a random take.
//!
//! Rows of `bytes_per_row` bytes are laid out back to back; a row belongs to
//! the page holding its first byte. A take samples `k` distinct rows
//! uniformly. Page `p` holding `n_p` rows is missed with probability
//! `C(N - n_p, k) / C(N, k)`, so the expectation is
//! `sum_p 1 - C(N - n_p, k) / C(N, k)`. Every page but the last holds either
//! `floor(page / b)` or `ceil(page / b)` rows, so the sum collapses to three
//! terms.

/// Probability that none of `k` rows sampled without replacement from `n`
/// falls among `m` marked rows.
fn miss_probability(n: u64, m: u64, k: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if m >= n || k > n - m {
        return 0.0;
    }
    let mut log = 0.0f64;
    for j in 0..k {
        log += (-(m as f64) / (n - j) as f64).ln_1p();
    }
    log.exp()
}

/// Number of pages holding the start of at least one row.
pub fn page_count(total_rows: u64, bytes_per_row: u64, page_bytes: u64) -> u64 {
    if total_rows == 0 {
        return 0;
    }
    ((total_rows as u128 - 1) * bytes_per_row as u128 / page_bytes as u128) as u64 + 1
}

/// First row starting at or after byte `page * page_bytes`.
fn first_row_of_page(page: u64, bytes_per_row: u64, page_bytes: u64) -> u64 {
    (page as u128 * page_bytes as u128).div_ceil(bytes_per_row as u128) as u64
}

/// Expected distinct pages read when taking `sample_k` distinct random rows.
pub fn expected_distinct_pages(total_rows: u64, bytes_per_row: u64, page_bytes: u64, sample_k: u64) -> f64 {
    assert!(bytes_per_row > 0 && page_bytes > 0, "sizes must be positive");
    let k = sample_k.min(total_rows);
    if k == 0 {
        return 0.0;
    }
    let pages = page_count(total_rows, bytes_per_row, page_bytes);
    let full = pages - 1;
    let rows_in_full = first_row_of_page(full, bytes_per_row, page_bytes);
    let last = total_rows - rows_in_full;
    let low = page_bytes / bytes_per_row;
    let high_pages = rows_in_full - low * full;
    let low_pages = full - high_pages;
    let touched = |rows_in_page: u64| 1.0 - miss_probability(total_rows, rows_in_page, k);
    low_pages as f64 * touched(low) + high_pages as f64 * touched(low + 1) + touched(last)
}
