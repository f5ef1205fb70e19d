// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Seeded synthetic data: random nested schemas for round-trip testing and
//! the fixed benchmark scenarios.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::array::{ArrayBuilder, DataType, Field, LogicalArray};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const PRIMITIVES: [DataType; 10] = [
    DataType::UInt8,
    DataType::UInt16,
    DataType::UInt32,
    DataType::UInt64,
    DataType::Int8,
    DataType::Int16,
    DataType::Int32,
    DataType::Int64,
    DataType::Float32,
    DataType::Float64,
];

/// A random field whose type nests at most `max_depth` list/struct layers.
pub fn random_field<R: Rng>(rng: &mut R, name: &str, max_depth: usize) -> Field {
    let nullable = rng.gen_bool(0.7);
    Field::new(name, random_type(rng, max_depth), nullable)
}

pub fn random_type<R: Rng>(rng: &mut R, max_depth: usize) -> DataType {
    let choice = if max_depth == 0 { rng.gen_range(0..4) } else { rng.gen_range(0..6) };
    match choice {
        0 => PRIMITIVES[rng.gen_range(0..PRIMITIVES.len())].clone(),
        1 => {
            if rng.gen_bool(0.5) {
                DataType::Utf8
            } else {
                DataType::Binary
            }
        }
        2 => DataType::fixed_size_list(
            PRIMITIVES[rng.gen_range(0..PRIMITIVES.len())].clone(),
            rng.gen_range(1..=4),
        ),
        3 => PRIMITIVES[rng.gen_range(0..4)].clone(),
        4 => DataType::List(Box::new(random_field(rng, "item", max_depth - 1))),
        _ => {
            let n = rng.gen_range(1..=3);
            DataType::Struct(
                (0..n)
                    .map(|i| random_field(rng, &format!("f{i}"), max_depth - 1))
                    .collect(),
            )
        }
    }
}

/// Knobs for [`random_array`].
#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    /// Probability that a slot of a nullable layer is null.
    pub null_density: f64,
    pub max_list_len: usize,
    pub max_bytes_len: usize,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            null_density: 0.1,
            max_list_len: 4,
            max_bytes_len: 12,
        }
    }
}

/// A random array of `len` rows matching `field`.
pub fn random_array<R: Rng>(rng: &mut R, field: &Field, len: usize, opts: &GenOptions) -> LogicalArray {
    let mut builder = ArrayBuilder::new(&field.data_type);
    for _ in 0..len {
        push_random(rng, &mut builder, &field.data_type, field.nullable, opts);
    }
    builder.finish()
}

fn push_random<R: Rng>(rng: &mut R, b: &mut ArrayBuilder, dt: &DataType, nullable: bool, opts: &GenOptions) {
    if nullable && opts.null_density > 0.0 && rng.gen_bool(opts.null_density.min(1.0)) {
        b.push_null();
        return;
    }
    match dt {
        DataType::Utf8 => {
            let n = rng.gen_range(0..=opts.max_bytes_len);
            let s: Vec<u8> = (0..n).map(|_| rng.gen_range(b'a'..=b'z')).collect();
            b.push_bytes(&s).unwrap();
        }
        DataType::Binary => {
            let n = rng.gen_range(0..=opts.max_bytes_len);
            let s: Vec<u8> = (0..n).map(|_| rng.gen()).collect();
            b.push_bytes(&s).unwrap();
        }
        DataType::List(item) => {
            let n = rng.gen_range(0..=opts.max_list_len);
            for _ in 0..n {
                push_random(rng, b.list_child(), &item.data_type, item.nullable, opts);
            }
            b.finish_list();
        }
        DataType::Struct(fields) => {
            for (i, f) in fields.iter().enumerate() {
                push_random(rng, b.struct_child(i), &f.data_type, f.nullable, opts);
            }
            b.finish_struct();
        }
        fixed => {
            let width = fixed.fixed_width().unwrap();
            let bytes = random_fixed_bytes(rng, fixed, width);
            b.push_fixed(&bytes).unwrap();
        }
    }
}

fn random_fixed_bytes<R: Rng>(rng: &mut R, dt: &DataType, width: usize) -> Vec<u8> {
    let item = match dt {
        DataType::FixedSizeList(item, _) => item.as_ref(),
        other => other,
    };
    let item_width = item.primitive_width().unwrap();
    let mut out = Vec::with_capacity(width);
    while out.len() < width {
        match item {
            DataType::Float32 => out.extend_from_slice(&(rng.gen::<f32>() * 100.0).to_le_bytes()),
            DataType::Float64 => out.extend_from_slice(&(rng.gen::<f64>() * 100.0).to_le_bytes()),
            _ => {
                // small magnitudes half the time so bit packing has something to do
                let v: u64 = if rng.gen_bool(0.5) { rng.gen_range(0..1000) } else { rng.gen() };
                out.extend_from_slice(&v.to_le_bytes()[..item_width]);
            }
        }
    }
    out
}

/// The eight benchmark data types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Scalar,
    String,
    ScalarList,
    StringList,
    Vector,
    VectorList,
    Image,
    ImageList,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Scalar,
        Scenario::String,
        Scenario::ScalarList,
        Scenario::StringList,
        Scenario::Vector,
        Scenario::VectorList,
        Scenario::Image,
        Scenario::ImageList,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Scalar => "scalar",
            Scenario::String => "string",
            Scenario::ScalarList => "scalar-list",
            Scenario::StringList => "string-list",
            Scenario::Vector => "vector",
            Scenario::VectorList => "vector-list",
            Scenario::Image => "image",
            Scenario::ImageList => "image-list",
        }
    }

    /// Top-level nullable column; only the top level holds nulls.
    pub fn field(&self) -> Field {
        let vector = DataType::fixed_size_list(DataType::Float32, 768);
        let dt = match self {
            Scenario::Scalar => DataType::UInt64,
            Scenario::String => DataType::Utf8,
            Scenario::ScalarList => DataType::list(DataType::UInt64, false),
            Scenario::StringList => DataType::list(DataType::Utf8, false),
            Scenario::Vector => vector,
            Scenario::VectorList => DataType::list(vector, false),
            Scenario::Image => DataType::Binary,
            Scenario::ImageList => DataType::list(DataType::Binary, false),
        };
        Field::new(self.name(), dt, true)
    }

    /// Default row count at desk scale.
    pub fn default_rows(&self) -> usize {
        match self {
            Scenario::Scalar | Scenario::String | Scenario::ScalarList | Scenario::StringList => 1_000_000,
            Scenario::Vector | Scenario::Image => 10_000,
            Scenario::VectorList | Scenario::ImageList => 2_000,
        }
    }

    /// Whether the leaf has variable-width values.
    pub fn is_variable(&self) -> bool {
        matches!(
            self,
            Scenario::String | Scenario::StringList | Scenario::Image | Scenario::ImageList
        )
    }

    pub fn has_lists(&self) -> bool {
        matches!(
            self,
            Scenario::ScalarList | Scenario::StringList | Scenario::VectorList | Scenario::ImageList
        )
    }

    /// Generates `rows` rows with the given top-level null fraction.
    ///
    /// Average payload sizes: scalar 8 B, string 16 B, lists of 5 items on
    /// average, vectors 3 KiB, images 20 KiB.
    pub fn generate(&self, rows: usize, null_fraction: f64, seed: u64) -> LogicalArray {
        let mut rng = rng(seed);
        let field = self.field();
        let mut b = ArrayBuilder::new(&field.data_type);
        for _ in 0..rows {
            if null_fraction > 0.0 && rng.gen_bool(null_fraction) {
                b.push_null();
                continue;
            }
            match self {
                Scenario::Scalar => b.push_fixed(&rng.gen::<u64>().to_le_bytes()).unwrap(),
                Scenario::String => push_string(&mut rng, &mut b),
                Scenario::Vector => push_vector(&mut rng, &mut b),
                Scenario::Image => push_image(&mut rng, &mut b),
                Scenario::ScalarList
                | Scenario::StringList
                | Scenario::VectorList
                | Scenario::ImageList => {
                    let n = rng.gen_range(0..=10);
                    for _ in 0..n {
                        let child = b.list_child();
                        match self {
                            Scenario::ScalarList => child.push_fixed(&rng.gen::<u64>().to_le_bytes()).unwrap(),
                            Scenario::StringList => push_string(&mut rng, child),
                            Scenario::VectorList => push_vector(&mut rng, child),
                            _ => push_image(&mut rng, child),
                        }
                    }
                    b.finish_list();
                }
            }
        }
        b.finish()
    }
}

fn push_string<R: Rng>(rng: &mut R, b: &mut ArrayBuilder) {
    let n = rng.gen_range(8..=24);
    let s: Vec<u8> = (0..n).map(|_| rng.gen_range(b'a'..=b'z')).collect();
    b.push_bytes(&s).unwrap();
}

fn push_vector<R: Rng>(rng: &mut R, b: &mut ArrayBuilder) {
    let mut bytes = Vec::with_capacity(3072);
    for _ in 0..768 {
        bytes.extend_from_slice(&rng.gen::<f32>().to_le_bytes());
    }
    b.push_fixed(&bytes).unwrap();
}

fn push_image<R: Rng>(rng: &mut R, b: &mut ArrayBuilder) {
    let n = rng.gen_range(10 * 1024..=30 * 1024);
    let mut bytes = vec![0u8; n];
    rng.fill(bytes.as_mut_slice());
    b.push_bytes(&bytes).unwrap();
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .iter()
            .find(|sc| sc.name() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
                format!("unknown scenario '{s}', expected one of {}", names.join(", "))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_arrays_validate() {
        let mut r = rng(7);
        for i in 0..200 {
            let field = random_field(&mut r, "c", 3);
            let density = [0.0, 0.1, 1.0][i % 3];
            let opts = GenOptions { null_density: density, ..Default::default() };
            let a = random_array(&mut r, &field, 50, &opts);
            assert_eq!(a.validate_field(&field), Ok(()), "{field:?}");
        }
    }

    #[test]
    fn scenario_widths() {
        let a = Scenario::Scalar.generate(1000, 0.0, 1);
        assert_eq!(a.avg_value_width().unwrap().bytes_per_row(), 8.0);
        let a = Scenario::Vector.generate(10, 0.0, 1);
        assert_eq!(a.avg_value_width().unwrap().bytes_per_row(), 3072.0);
        let a = Scenario::ImageList.generate(40, 0.0, 1);
        let w = a.avg_value_width().unwrap().bytes_per_row();
        assert!((60_000.0..160_000.0).contains(&w), "{w}");
        let a = Scenario::String.generate(2000, 0.1, 3);
        assert!((a.null_count() as f64 / 2000.0 - 0.1).abs() < 0.03);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = Scenario::StringList.generate(500, 0.1, 42);
        let b = Scenario::StringList.generate(500, 0.1, 42);
        assert_eq!(a, b);
    }
}
