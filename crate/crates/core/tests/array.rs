// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use proptest::prelude::*;
use rand::Rng;
use zipcol::array::{DataType, LogicalArray, Payload};
use zipcol::datagen::{random_array, random_field, rng, GenOptions};

fn generated(seed: u64, len: usize, null_density: f64) -> LogicalArray {
    let mut r = rng(seed);
    let field = random_field(&mut r, "c", 3);
    random_array(&mut r, &field, len, &GenOptions { null_density, ..Default::default() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_arrays_are_valid_and_rebuild_from_values(seed in any::<u64>(), len in 0usize..200, null_density in 0.0f64..=1.0) {
        let a = generated(seed, len, null_density);
        prop_assert!(a.validate().is_ok());
        let values = a.to_values();
        prop_assert_eq!(values.len(), len);
        prop_assert_eq!(LogicalArray::from_values(a.data_type(), &values).unwrap(), a);
    }

    #[test]
    fn slices_compose_and_concatenate_back(seed in any::<u64>(), len in 0usize..200, cut in 0.0f64..=1.0, inner in 0.0f64..=1.0) {
        let a = generated(seed, len, 0.3);
        let c = (cut * len as f64) as usize;
        let (left, right) = (a.slice(0, c).unwrap(), a.slice(c, len - c).unwrap());
        prop_assert!(left.validate().is_ok() && right.validate().is_ok());
        prop_assert_eq!(LogicalArray::concat(&[left.clone(), right]).unwrap(), a.clone());

        // slicing a slice is slicing the original
        let i = (inner * c as f64) as usize;
        let nested = left.slice(i, c - i).unwrap();
        prop_assert_eq!(nested.to_values(), a.to_values()[i..c].to_vec());
        prop_assert!(a.slice(c, len - c + 1).is_err());
    }

    #[test]
    fn take_matches_row_values(seed in any::<u64>(), len in 1usize..200) {
        let a = generated(seed, len, 0.3);
        let mut r = rng(seed);
        let indices: Vec<usize> = (0..r.gen_range(0..50)).map(|_| r.gen_range(0..len)).collect();
        let values = a.to_values();
        let expected: Vec<_> = indices.iter().map(|i| values[*i].clone()).collect();
        prop_assert_eq!(a.take(&indices).unwrap().to_values(), expected);
        prop_assert!(a.take(&[len]).is_err());
    }
}

fn strings(offsets: Vec<u64>, data: &[u8]) -> zipcol::Result<LogicalArray> {
    LogicalArray::try_new(DataType::Utf8, offsets.len() - 1, None, Payload::Bytes { offsets, data: data.to_vec() })
}

#[test]
fn invalid_offsets_are_rejected() {
    assert!(strings(vec![0, 2, 4], b"abcd").is_ok());
    // decreasing
    assert!(strings(vec![0, 3, 2], b"abcd").is_err());
    // past the data
    assert!(strings(vec![0, 2, 5], b"abcd").is_err());
    // not valid utf-8
    assert!(strings(vec![0, 2], &[0xff, 0xfe]).is_err());
}

#[test]
fn payload_length_must_match() {
    let short = LogicalArray::try_new(DataType::UInt32, 3, None, Payload::Primitive(vec![0; 8]));
    assert!(short.is_err());
    let child = LogicalArray::try_new(DataType::Float32, 5, None, Payload::Primitive(vec![0; 20])).unwrap();
    let fsl = LogicalArray::try_new(DataType::fixed_size_list(DataType::Float32, 2), 3, None, Payload::FixedSizeList(Box::new(child)));
    assert!(fsl.is_err());
}
