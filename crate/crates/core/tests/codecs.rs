// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use proptest::prelude::*;
use zipcol::array::LeafValues;
use zipcol::codecs::{encode, BlockAlgorithm, CodecRequest, CompressedBuffer, Transparency};
use zipcol::fullzip::encode_full_zip;
use zipcol::repdef::RepDefLevels;
use zipcol::Error;

fn transparent_requests() -> impl Strategy<Value = CodecRequest> {
    prop_oneof![
        Just(CodecRequest::Passthrough),
        Just(CodecRequest::BitPack),
        Just(CodecRequest::ByteAligned),
        Just(CodecRequest::Dictionary),
        Just(CodecRequest::PerValueBlock(BlockAlgorithm::Identity)),
        Just(CodecRequest::PerValueBlock(BlockAlgorithm::RunLength)),
    ]
}

fn fixed_values(ints: &[u64], width: usize) -> LeafValues {
    let mut v = LeafValues::new_fixed(width);
    for i in ints {
        v.push(&i.to_le_bytes()[..width]);
    }
    v
}

fn variable_values(items: &[Vec<u8>]) -> LeafValues {
    let mut v = LeafValues::new_variable();
    for i in items {
        v.push(i);
    }
    v
}

/// Value `i` decoded from a copy of the buffer that keeps only the bytes of
/// its advertised extent.
fn decode_from_extent(buf: &CompressedBuffer, i: usize) -> Vec<u8> {
    let extent = buf.extent(i).unwrap();
    let mut masked = vec![0u8; buf.bytes.len()];
    masked[extent.clone()].copy_from_slice(&buf.bytes[extent]);
    let isolated = CompressedBuffer { bytes: masked, ..buf.clone() };
    isolated.decode_one(i).unwrap()
}

fn check_extents(values: &LeafValues, request: CodecRequest) -> Result<(), TestCaseError> {
    let buf = encode(values, request).map_err(|e| TestCaseError::fail(format!("{request:?}: {e}")))?;
    prop_assert_eq!(buf.transparency(), Transparency::Transparent);
    prop_assert_eq!(&buf.decode().unwrap(), values);
    for i in 0..values.len() {
        prop_assert_eq!(decode_from_extent(&buf, i), values.get(i).to_vec(), "{:?} value {}", request, i);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fixed_width_extents_are_sound(
        ints in proptest::collection::vec(prop_oneof![0u64..1000, any::<u64>()], 0..200),
        width in prop_oneof![Just(1usize), Just(2), Just(4), Just(8)],
        request in transparent_requests(),
    ) {
        check_extents(&fixed_values(&ints, width), request)?;
    }

    #[test]
    fn variable_width_extents_are_sound(
        items in proptest::collection::vec(
            prop_oneof![proptest::collection::vec(any::<u8>(), 0..40), Just(vec![7u8; 30])],
            0..100,
        ),
        request in prop_oneof![
            Just(CodecRequest::Passthrough),
            Just(CodecRequest::Dictionary),
            Just(CodecRequest::PerValueBlock(BlockAlgorithm::Identity)),
            Just(CodecRequest::PerValueBlock(BlockAlgorithm::RunLength)),
        ],
    ) {
        check_extents(&variable_values(&items), request)?;
    }

    #[test]
    fn dense_codecs_place_value_i_at_i_times_width(
        ints in proptest::collection::vec(any::<u64>(), 1..100),
        width in prop_oneof![Just(1usize), Just(2), Just(4), Just(8)],
        request in prop_oneof![Just(CodecRequest::Passthrough), Just(CodecRequest::ByteAligned)],
    ) {
        let buf = encode(&fixed_values(&ints, width), request).unwrap();
        let w = buf.codec.per_value_width().unwrap();
        for i in 0..ints.len() {
            prop_assert_eq!(buf.extent(i).unwrap(), i * w..(i + 1) * w);
        }
    }
}

#[test]
fn opaque_codecs_are_refused_for_random_access() {
    let values = fixed_values(&[1, 2, 3, 4], 8);
    for algorithm in [BlockAlgorithm::Identity, BlockAlgorithm::RunLength] {
        let buf = encode(&values, CodecRequest::ChunkedBlock(algorithm)).unwrap();
        assert_eq!(buf.transparency(), Transparency::Opaque);
        assert_eq!(buf.decode().unwrap(), values);
        assert!(matches!(buf.decode_one(0), Err(Error::Unsupported(_))));
        let levels = RepDefLevels { rep: vec![], def: vec![], max_rep: 0, max_def: 0, values: values.clone() };
        assert!(matches!(encode_full_zip(&levels, &buf.codec), Err(Error::IllegalCodec(_))));
    }
}

#[test]
fn reserved_algorithms_are_unsupported() {
    let values = variable_values(&[b"abc".to_vec()]);
    for algorithm in [BlockAlgorithm::Lz4, BlockAlgorithm::Zstd] {
        assert!(matches!(encode(&values, CodecRequest::PerValueBlock(algorithm)), Err(Error::Unsupported(_))));
    }
}
