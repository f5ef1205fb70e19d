// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use proptest::prelude::*;
use rand::Rng;
use zipcol::array::{DataType, Field};
use zipcol::arrow::{planned_take_iops, scan_arrow, take_arrow, write_arrow_layout};
use zipcol::datagen::{random_array, random_field, rng, GenOptions};
use zipcol::io::{CoalescePolicy, IoEngine};

fn written(field: &Field, seed: u64, len: usize, null_density: f64, base: u64) -> (IoEngine, zipcol::arrow::ArrowLayout, zipcol::array::LogicalArray) {
    let mut r = rng(seed);
    let array = random_array(&mut r, field, len, &GenOptions { null_density, ..Default::default() });
    let (bytes, layout) = write_arrow_layout(field, &array, base).unwrap();
    let mut file = vec![0u8; base as usize];
    file.extend_from_slice(&bytes);
    (IoEngine::in_memory(file, CoalescePolicy::disabled()), layout, array)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scan_and_take_round_trip(seed in any::<u64>(), len in 1usize..300, null_density in 0.0f64..=1.0, base in 0u64..4) {
        let field = random_field(&mut rng(seed ^ 0x5eed), "c", 3);
        let (io, layout, array) = written(&field, seed, len, null_density, base * 8);
        prop_assert_eq!(&scan_arrow(&io, &layout).unwrap(), &array);

        let mut r = rng(seed);
        let rows: Vec<u64> = (0..r.gen_range(1..20)).map(|_| r.gen_range(0..len as u64)).collect();
        let indices: Vec<usize> = rows.iter().map(|r| *r as usize).collect();
        let (got, _) = take_arrow(&io, &layout, &rows).unwrap();
        prop_assert_eq!(got, array.take(&indices).unwrap());
    }

    /// The read plan of a single-row take is a function of the type only.
    #[test]
    fn single_row_take_cost_depends_only_on_type(seed in any::<u64>(), len in 1usize..200, null_density in 0.0f64..=1.0) {
        let field = random_field(&mut rng(seed ^ 0x5eed), "c", 3);
        let (planned, phases) = planned_take_iops(&field);
        let (io, layout, _) = written(&field, seed, len, null_density, 0);
        let row = rng(seed).gen_range(0..len as u64);
        io.reset_stats();
        let (_, trace) = take_arrow(&io, &layout, &[row]).unwrap();
        prop_assert_eq!(trace.iops(), planned);
        prop_assert_eq!(trace.phases(), phases);
        prop_assert_eq!(io.stats().iops, planned as u64);
    }
}

#[test]
fn list_of_strings_costs_five_reads_in_three_phases() {
    let field = Field::new("l", DataType::list(DataType::Utf8, true), true);
    assert_eq!(planned_take_iops(&field), (5, 3));
    let items_required = Field::new("l", DataType::list(DataType::Utf8, false), true);
    assert_eq!(planned_take_iops(&items_required), (4, 3));
    assert_eq!(planned_take_iops(&Field::new("x", DataType::UInt64, false)), (1, 1));
}

#[test]
fn out_of_range_take_fails() {
    let field = Field::new("x", DataType::Int32, true);
    let (io, layout, _) = written(&field, 1, 10, 0.1, 0);
    assert!(take_arrow(&io, &layout, &[10]).is_err());
}


#[test]
fn take_of_empty_list_at_end_of_layout() {
    let field = Field::new("l", DataType::list(DataType::Binary, true), true);
    let array = zipcol::array::LogicalArray::from_values(
        &field.data_type,
        &[zipcol::array::Value::List(vec![]), zipcol::array::Value::Null],
    )
    .unwrap();
    let (bytes, layout) = write_arrow_layout(&field, &array, 0).unwrap();
    let io = IoEngine::in_memory(bytes, CoalescePolicy::disabled());
    for row in 0..2 {
        let (got, trace) = take_arrow(&io, &layout, &[row]).unwrap();
        assert_eq!(got, array.take(&[row as usize]).unwrap());
        assert_eq!(trace.iops(), planned_take_iops(&field).0);
    }
}
