// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use proptest::prelude::*;
use zipcol::datagen::{random_array, random_field, rng, GenOptions};
use zipcol::repdef::{leaf_paths, shred, unshred};
use zipcol::{DataType, Field};

fn density() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.1), Just(1.0), 0.0..=1.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn shred_then_unshred_is_identity(seed in any::<u64>(), len in 0usize..1000, null_density in density()) {
        let mut r = rng(seed);
        let field = random_field(&mut r, "c", 3);
        let opts = GenOptions { null_density, ..Default::default() };
        let array = random_array(&mut r, &field, len, &opts);
        let leaves = shred(&field, &array).unwrap();
        prop_assert_eq!(unshred(&field, &leaves).unwrap(), array);
    }

    #[test]
    fn leaves_store_only_fully_valid_values(seed in any::<u64>(), len in 0usize..300, null_density in density()) {
        let mut r = rng(seed);
        let field = random_field(&mut r, "c", 3);
        let opts = GenOptions { null_density, ..Default::default() };
        let array = random_array(&mut r, &field, len, &opts);
        for levels in shred(&field, &array).unwrap() {
            // definition level 0 marks a value that is valid at every layer
            let valid = if levels.def.is_empty() { levels.len() } else { levels.def.iter().filter(|d| **d == 0).count() };
            prop_assert_eq!(levels.values.len(), valid);
            let rows = if levels.rep.is_empty() {
                levels.len()
            } else {
                levels.rep.iter().filter(|r| **r == levels.max_rep).count()
            };
            prop_assert_eq!(rows, len);
        }
    }
}

#[test]
fn fixed_size_lists_are_primitive_leaves() {
    let vector = DataType::fixed_size_list(DataType::Float32, 8);
    let levels = |field: Field| {
        let paths = leaf_paths(&field);
        assert_eq!(paths.len(), 1);
        (paths[0].max_rep, paths[0].max_def)
    };
    assert_eq!(levels(Field::new("v", vector.clone(), true)), (0, 1));
    assert_eq!(levels(Field::new("v", vector.clone(), false)), (0, 0));
    // a list of vectors adds exactly one repetition level
    assert_eq!(levels(Field::new("l", DataType::list(vector, false), false)).0, 1);
}
