// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use proptest::prelude::*;
use zipcol::codecs::{BlockAlgorithm, Codec, CodecRequest};
use zipcol::datagen::{random_array, random_field, rng, GenOptions};
use zipcol::fullzip::{data_range_from_index, decode_full_zip_scan, decode_rows, encode_full_zip, locate_rows, RowLocation};
use zipcol::repdef::{shred, RepDefLevels};
use zipcol::{DataType, Error, Field};

fn requests() -> impl Strategy<Value = CodecRequest> {
    prop_oneof![
        Just(CodecRequest::Passthrough),
        Just(CodecRequest::BitPack),
        Just(CodecRequest::Dictionary),
        Just(CodecRequest::PerValueBlock(BlockAlgorithm::RunLength)),
    ]
}

fn bits(n: u16) -> u32 {
    16 - n.leading_zeros()
}

/// Entry index where each row starts, computed from the repetition levels.
fn row_bounds(levels: &RepDefLevels) -> Vec<usize> {
    let mut starts: Vec<usize> = if levels.max_rep == 0 {
        (0..levels.len()).collect()
    } else {
        (0..levels.len()).filter(|i| levels.rep[*i] == levels.max_rep).collect()
    };
    starts.push(levels.len());
    starts
}

/// Byte size of each zipped record, counted from the levels and codec.
fn record_sizes(levels: &RepDefLevels, codec: &Codec) -> Vec<u64> {
    let control = (bits(levels.max_rep) + bits(levels.max_def)).div_ceil(8).max(1) as u64;
    let compressed = codec.encode(&levels.values).unwrap();
    let value_lens: Vec<u64> = (0..levels.values.len()).map(|i| compressed.extent(i).unwrap().len() as u64).collect();
    let dense = codec.per_value_width();
    let prefix = {
        let max = value_lens.iter().copied().max().unwrap_or(0);
        ((64 - max.leading_zeros()) as u64).div_ceil(8).max(1)
    };
    let mut next_value = 0;
    (0..levels.len())
        .map(|i| {
            let valid = levels.def.is_empty() || levels.def[i] == 0;
            let body = match (dense, valid) {
                (Some(w), _) => w as u64,
                (None, true) => prefix + value_lens[next_value],
                (None, false) => 0,
            };
            next_value += valid as usize;
            control + body
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(192))]

    #[test]
    fn pages_round_trip_and_match_byte_counts(
        seed in any::<u64>(),
        len in 0usize..300,
        null_density in prop_oneof![Just(0.0), Just(0.1), Just(1.0)],
        request in requests(),
    ) {
        let mut r = rng(seed);
        let field = random_field(&mut r, "c", 3);
        let opts = GenOptions { null_density, max_bytes_len: 40, ..Default::default() };
        let array = random_array(&mut r, &field, len, &opts);
        for levels in shred(&field, &array).unwrap() {
            let codec = match Codec::resolve(request, &levels.values) {
                Ok(c) => c,
                // bit packing applies only to narrow fixed-width leaves
                Err(Error::IllegalCodec(_)) if request == CodecRequest::BitPack => continue,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            let page = encode_full_zip(&levels, &codec).unwrap();
            prop_assert_eq!(&decode_full_zip_scan(&page.layout, &page.zipped).unwrap(), &levels);

            let sizes = record_sizes(&levels, &codec);
            prop_assert_eq!(page.zipped.len() as u64, sizes.iter().sum::<u64>());

            // row offsets from the record sizes
            let bounds = row_bounds(&levels);
            let mut offsets = vec![0u64];
            for w in bounds.windows(2) {
                offsets.push(offsets.last().unwrap() + sizes[w[0]..w[1]].iter().sum::<u64>());
            }
            if page.layout.has_rep_index() {
                prop_assert_eq!(page.rep_index_entries(), offsets.clone());
            } else {
                prop_assert!(page.rep_index.is_empty());
            }

            // every single-row access: one direct read, or one index read then one data read
            for row in 0..len as u64 {
                let (range, reads) = match locate_rows(&page.layout, row..row + 1).unwrap() {
                    RowLocation::Direct(range) => (range, 1),
                    RowLocation::Indexed(at) => {
                        let index = &page.rep_index[at.start as usize..at.end as usize];
                        (data_range_from_index(&page.layout, index, 1).unwrap(), 2)
                    }
                };
                prop_assert_eq!(reads, if page.layout.has_rep_index() { 2 } else { 1 });
                prop_assert_eq!(range.clone(), offsets[row as usize]..offsets[row as usize + 1]);
                let bytes = &page.zipped[range.start as usize..range.end as usize];
                let decoded = decode_rows(&page.layout, bytes, 1, range.start).unwrap();
                let b = bounds[row as usize]..bounds[row as usize + 1];
                prop_assert_eq!(decoded, levels.slice_entries(b));
            }
        }
    }
}

#[test]
fn struct_of_list_of_strings_uses_one_byte_control_words() {
    let inner = DataType::list(DataType::Utf8, true);
    let field = Field::new("s", DataType::Struct(vec![Field::new("l", inner, true)]), true);
    let array = random_array(&mut rng(3), &field, 50, &GenOptions::default());
    let levels = shred(&field, &array).unwrap().remove(0);
    let page = encode_full_zip(&levels, &Codec::resolve(CodecRequest::Passthrough, &levels.values).unwrap()).unwrap();
    assert_eq!(page.layout.control.width_bytes, 1);
}

#[test]
fn read_count_does_not_grow_with_nesting() {
    let mut dt = DataType::Utf8;
    for depth in 1..=4 {
        dt = DataType::list(dt, true);
        let field = Field::new("c", dt.clone(), true);
        let array = random_array(&mut rng(depth), &field, 200, &GenOptions::default());
        let levels = shred(&field, &array).unwrap().remove(0);
        let page = encode_full_zip(&levels, &Codec::resolve(CodecRequest::Passthrough, &levels.values).unwrap()).unwrap();
        for row in 0..200 {
            let plan = locate_rows(&page.layout, row..row + 1).unwrap();
            assert!(matches!(plan, RowLocation::Indexed(_)), "depth {depth}");
        }
    }
}

#[test]
fn nullable_int32_records_are_five_bytes() {
    let field = Field::new("x", DataType::Int32, true);
    let array = zipcol::LogicalArray::from_values(
        &DataType::Int32,
        &[zipcol::array::Value::Int(7), zipcol::array::Value::Null, zipcol::array::Value::Int(9)],
    )
    .unwrap();
    let levels = &shred(&field, &array).unwrap()[0];
    let codec = Codec::resolve(CodecRequest::Passthrough, &levels.values).unwrap();
    let page = encode_full_zip(levels, &codec).unwrap();
    assert_eq!(page.zipped, [0, 7, 0, 0, 0, 1, 0, 0, 0, 0, 0, 9, 0, 0, 0]);
    assert_eq!(page.layout.fixed_record_width, Some(5));
    assert!(page.rep_index.is_empty());
}
