// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Repetition / definition level shredding.
//!
//! Repetition levels count *down*: an entry starting a new top-level row
//! carries `max_rep`, an entry starting a new list at nesting depth `d`
//! (1 = outermost list) carries `max_rep - d + 1`, and an entry continuing
//! the innermost list carries 0. With a single list layer this is "1 = new
//! list, 0 = continue".
//!
//! Definition levels count *up* from the leaf: 0 is a valid leaf value and
//! every layer between the leaf and the root adds its codes in order (null
//! item, then for each list "empty" and "null", then "null struct"). Layers
//! that are not nullable add no null code.

use std::ops::Range;

use crate::array::{ArrayBuilder, DataType, Field, LeafValues, LogicalArray, Payload};
use crate::{Error, Result};

/// Shredded form of one leaf column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepDefLevels {
    pub rep: Vec<u16>,
    pub def: Vec<u16>,
    pub max_rep: u16,
    pub max_def: u16,
    /// Leaf payload of entries with `def == 0`, in order.
    pub values: LeafValues,
}

/// Bits needed to store the largest repetition and definition level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelWidths {
    pub rep_bits: u8,
    pub def_bits: u8,
}

impl LevelWidths {
    pub fn new(max_rep: u16, max_def: u16) -> Self {
        Self {
            rep_bits: bits_for(max_rep as u64),
            def_bits: bits_for(max_def as u64),
        }
    }
}

/// Number of bits needed to represent `max` (0 for 0).
pub fn bits_for(max: u64) -> u8 {
    (64 - max.leading_zeros()) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LayerKind {
    /// Index of the child taken on the way to the leaf.
    Struct(usize),
    List,
    Leaf,
}

#[derive(Debug, Clone)]
struct Layer {
    kind: LayerKind,
    null_def: Option<u16>,
    empty_def: Option<u16>,
    /// Repetition level of an entry continuing this list.
    rep_level: u16,
    /// Largest definition code owned by this layer or any layer below it.
    max_def_below: u16,
}

/// Level layout of the path from the root field to one leaf.
#[derive(Debug, Clone)]
pub struct LeafPath {
    layers: Vec<Layer>,
    pub max_rep: u16,
    pub max_def: u16,
    pub leaf_type: DataType,
}

impl LeafPath {
    pub fn widths(&self) -> LevelWidths {
        LevelWidths::new(self.max_rep, self.max_def)
    }

    /// Empty leaf container for this path's leaf type.
    pub fn empty_values(&self) -> LeafValues {
        match self.leaf_type.fixed_width() {
            Some(w) => LeafValues::new_fixed(w),
            None => LeafValues::new_variable(),
        }
    }

    pub fn empty_levels(&self) -> RepDefLevels {
        RepDefLevels {
            rep: Vec::new(),
            def: Vec::new(),
            max_rep: self.max_rep,
            max_def: self.max_def,
            values: self.empty_values(),
        }
    }

    /// Definition code of a null at the top-level layer, if it is nullable.
    pub fn top_null_def(&self) -> Option<u16> {
        self.layers[0].null_def
    }
}

/// Level layouts of every leaf of `field`, in depth-first order.
pub fn leaf_paths(field: &Field) -> Vec<LeafPath> {
    let mut out = Vec::new();
    let mut stack = Vec::new();
    collect_paths(field, &mut stack, &mut out);
    out
}

fn collect_paths(field: &Field, stack: &mut Vec<(LayerKind, bool)>, out: &mut Vec<LeafPath>) {
    match &field.data_type {
        DataType::Struct(children) => {
            for (i, child) in children.iter().enumerate() {
                stack.push((LayerKind::Struct(i), field.nullable));
                collect_paths(child, stack, out);
                stack.pop();
            }
        }
        DataType::List(child) => {
            stack.push((LayerKind::List, field.nullable));
            collect_paths(child, stack, out);
            stack.pop();
        }
        leaf => {
            stack.push((LayerKind::Leaf, field.nullable));
            out.push(build_path(stack, leaf.clone()));
            stack.pop();
        }
    }
}

fn build_path(stack: &[(LayerKind, bool)], leaf_type: DataType) -> LeafPath {
    let mut layers: Vec<Layer> = stack
        .iter()
        .map(|(kind, _)| Layer {
            kind: *kind,
            null_def: None,
            empty_def: None,
            rep_level: 0,
            max_def_below: 0,
        })
        .collect();
    let mut def = 0u16;
    for (layer, (kind, nullable)) in layers.iter_mut().zip(stack).rev() {
        if *kind == LayerKind::List {
            def += 1;
            layer.empty_def = Some(def);
        }
        if *nullable {
            def += 1;
            layer.null_def = Some(def);
        }
        layer.max_def_below = def;
    }
    let max_rep = stack.iter().filter(|(k, _)| *k == LayerKind::List).count() as u16;
    let mut depth = 0;
    for layer in layers.iter_mut() {
        if layer.kind == LayerKind::List {
            depth += 1;
            layer.rep_level = max_rep - depth;
        }
    }
    LeafPath {
        layers,
        max_rep,
        max_def: def,
        leaf_type,
    }
}

/// Level widths of a type: the widest over all of its leaves.
pub fn level_widths(field: &Field) -> LevelWidths {
    leaf_paths(field).iter().fold(LevelWidths::new(0, 0), |acc, p| {
        let w = p.widths();
        LevelWidths {
            rep_bits: acc.rep_bits.max(w.rep_bits),
            def_bits: acc.def_bits.max(w.def_bits),
        }
    })
}

impl RepDefLevels {
    pub fn len(&self) -> usize {
        self.rep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rep.is_empty()
    }

    pub fn widths(&self) -> LevelWidths {
        LevelWidths::new(self.max_rep, self.max_def)
    }

    /// Number of top-level rows (entries carrying `max_rep`).
    pub fn num_rows(&self) -> usize {
        self.rep.iter().filter(|r| **r == self.max_rep).count()
    }

    /// Entry index at which each row starts.
    pub fn row_starts(&self) -> Vec<usize> {
        self.rep
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == self.max_rep)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn num_values(&self) -> usize {
        self.def.iter().filter(|d| **d == 0).count()
    }

    pub fn push(&mut self, rep: u16, def: u16) {
        self.rep.push(rep);
        self.def.push(def);
    }

    /// Appends another fragment of the same leaf column.
    pub fn extend(&mut self, other: &RepDefLevels) {
        debug_assert_eq!(self.max_rep, other.max_rep);
        debug_assert_eq!(self.max_def, other.max_def);
        self.rep.extend_from_slice(&other.rep);
        self.def.extend_from_slice(&other.def);
        self.values.extend(&other.values);
    }

    /// Entries `[range)` with their leaf values.
    pub fn slice_entries(&self, range: Range<usize>) -> RepDefLevels {
        let value_start = self.def[..range.start].iter().filter(|d| **d == 0).count();
        let value_count = self.def[range.clone()].iter().filter(|d| **d == 0).count();
        RepDefLevels {
            rep: self.rep[range.clone()].to_vec(),
            def: self.def[range].to_vec(),
            max_rep: self.max_rep,
            max_def: self.max_def,
            values: self.values.slice(value_start..value_start + value_count),
        }
    }

    /// Checks level bounds and the value count.
    pub fn check(&self) -> Result<()> {
        if self.rep.len() != self.def.len() {
            return Err(Error::corrupt(0, "rep and def streams differ in length"));
        }
        if let Some(i) = self.rep.iter().position(|r| *r > self.max_rep) {
            return Err(Error::corrupt(i as u64, format!("repetition level exceeds max {}", self.max_rep)));
        }
        if let Some(i) = self.def.iter().position(|d| *d > self.max_def) {
            return Err(Error::corrupt(i as u64, format!("definition level exceeds max {}", self.max_def)));
        }
        if self.num_values() != self.values.len() {
            return Err(Error::corrupt(
                0,
                format!("{} valid entries but {} leaf values", self.num_values(), self.values.len()),
            ));
        }
        Ok(())
    }
}

/// Shreds `array` into one level stream per leaf of `field`.
pub fn shred(field: &Field, array: &LogicalArray) -> Result<Vec<RepDefLevels>> {
    array
        .validate_field(field)
        .map_err(|v| Error::InvalidArray(v.to_string()))?;
    let paths = leaf_paths(field);
    let mut out = Vec::with_capacity(paths.len());
    for path in &paths {
        let mut levels = path.empty_levels();
        for row in 0..array.len() {
            walk(array, path, 0, row, path.max_rep, &mut levels);
        }
        out.push(levels);
    }
    Ok(out)
}

fn walk(array: &LogicalArray, path: &LeafPath, depth: usize, row: usize, rep: u16, out: &mut RepDefLevels) {
    let layer = &path.layers[depth];
    if !array.is_valid(row) {
        // validated: nulls only appear in nullable layers
        out.push(rep, layer.null_def.expect("null in non-nullable layer"));
        return;
    }
    match (layer.kind, array.payload()) {
        (LayerKind::Struct(i), Payload::Struct(children)) => {
            walk(&children[i], path, depth + 1, row, rep, out)
        }
        (LayerKind::List, Payload::List { offsets, child }) => {
            let (start, end) = (offsets[row] as usize, offsets[row + 1] as usize);
            if start == end {
                out.push(rep, layer.empty_def.unwrap());
            } else {
                for j in start..end {
                    let r = if j == start { rep } else { layer.rep_level };
                    walk(child, path, depth + 1, j, r, out);
                }
            }
        }
        (LayerKind::Leaf, payload) => {
            out.push(rep, 0);
            match payload {
                Payload::Primitive(data) => {
                    let w = array.data_type().primitive_width().unwrap();
                    out.values.push(&data[row * w..(row + 1) * w]);
                }
                Payload::FixedSizeList(child) => {
                    let w = path.leaf_type.fixed_width().unwrap();
                    match child.payload() {
                        Payload::Primitive(data) => out.values.push(&data[row * w..(row + 1) * w]),
                        _ => unreachable!("fixed-size-list child is primitive"),
                    }
                }
                Payload::Bytes { offsets, data } => {
                    out.values.push(&data[offsets[row] as usize..offsets[row + 1] as usize])
                }
                _ => unreachable!("leaf payload"),
            }
        }
        _ => unreachable!("validated array matches its type"),
    }
}

/// Rebuilds an array of type `field` from one level stream per leaf.
pub fn unshred(field: &Field, levels: &[RepDefLevels]) -> Result<LogicalArray> {
    let paths = leaf_paths(field);
    if levels.len() != paths.len() {
        return Err(Error::invalid(format!(
            "{} leaves in type but {} level streams",
            paths.len(),
            levels.len()
        )));
    }
    for (path, lv) in paths.iter().zip(levels) {
        if lv.max_rep != path.max_rep || lv.max_def != path.max_def {
            return Err(Error::corrupt(
                0,
                format!(
                    "level maxima ({}, {}) do not match type ({}, {})",
                    lv.max_rep, lv.max_def, path.max_rep, path.max_def
                ),
            ));
        }
        lv.check()?;
    }
    let mut state = Unshredder {
        paths: &paths,
        levels,
        cursor: vec![0; levels.len()],
        value_cursor: vec![0; levels.len()],
    };
    let mut builder = ArrayBuilder::new(&field.data_type);
    let first = &levels[0];
    while state.cursor[0] < first.len() {
        let at = state.cursor[0];
        if first.rep[at] != first.max_rep {
            return Err(Error::corrupt(at as u64, "row does not start with a new-row repetition level"));
        }
        state.decode_slot(&mut builder, &field.data_type, 0, 0..levels.len())?;
    }
    for (i, lv) in levels.iter().enumerate() {
        if state.cursor[i] != lv.len() {
            return Err(Error::corrupt(state.cursor[i] as u64, "trailing level entries"));
        }
    }
    Ok(builder.finish())
}

struct Unshredder<'a> {
    paths: &'a [LeafPath],
    levels: &'a [RepDefLevels],
    cursor: Vec<usize>,
    value_cursor: Vec<usize>,
}

impl Unshredder<'_> {
    fn def_at(&self, leaf: usize) -> Result<u16> {
        let at = self.cursor[leaf];
        self.levels[leaf]
            .def
            .get(at)
            .copied()
            .ok_or_else(|| Error::corrupt(at as u64, "level stream ended mid-row"))
    }

    /// Consumes one entry from every leaf in `leaves`, which must all carry
    /// the code selected by `pick` at `depth`.
    fn consume_marker(&mut self, depth: usize, leaves: Range<usize>, pick: fn(&Layer) -> Option<u16>) -> Result<()> {
        for leaf in leaves {
            let expected = pick(&self.paths[leaf].layers[depth]);
            let def = self.def_at(leaf)?;
            if Some(def) != expected {
                return Err(Error::corrupt(self.cursor[leaf] as u64, "sibling leaves disagree on structure"));
            }
            self.cursor[leaf] += 1;
        }
        Ok(())
    }

    fn decode_slot(&mut self, builder: &mut ArrayBuilder, dt: &DataType, depth: usize, leaves: Range<usize>) -> Result<()> {
        let rep_leaf = leaves.start;
        let layer = &self.paths[rep_leaf].layers[depth];
        let def = self.def_at(rep_leaf)?;
        if def > layer.max_def_below {
            return Err(Error::corrupt(self.cursor[rep_leaf] as u64, "definition level names an ancestor"));
        }
        if layer.null_def == Some(def) {
            self.consume_marker(depth, leaves, |l| l.null_def)?;
            builder.push_null();
            return Ok(());
        }
        match dt {
            DataType::Struct(fields) => {
                let mut start = leaves.start;
                for (i, f) in fields.iter().enumerate() {
                    let n = f.data_type.leaf_count();
                    self.decode_slot(builder.struct_child(i), &f.data_type, depth + 1, start..start + n)?;
                    start += n;
                }
                builder.finish_struct();
            }
            DataType::List(item) => {
                if layer.empty_def == Some(def) {
                    self.consume_marker(depth, leaves, |l| l.empty_def)?;
                    builder.finish_list();
                    return Ok(());
                }
                let continue_rep = layer.rep_level;
                loop {
                    self.decode_slot(builder.list_child(), &item.data_type, depth + 1, leaves.clone())?;
                    let lv = &self.levels[rep_leaf];
                    let at = self.cursor[rep_leaf];
                    if at >= lv.len() || lv.rep[at] != continue_rep {
                        break;
                    }
                }
                builder.finish_list();
            }
            _ => {
                if def != 0 {
                    return Err(Error::corrupt(self.cursor[rep_leaf] as u64, "unexpected definition level at leaf"));
                }
                let vi = self.value_cursor[rep_leaf];
                let value = self.levels[rep_leaf].values.get(vi);
                if dt.is_variable_width() {
                    builder.push_bytes(value)?;
                } else {
                    builder.push_fixed(value)?;
                }
                self.value_cursor[rep_leaf] += 1;
                self.cursor[rep_leaf] += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::Value;

    fn example_field() -> Field {
        Field::new(
            "s",
            DataType::Struct(vec![Field::new("l", DataType::list(DataType::Utf8, true), true)]),
            true,
        )
    }

    fn example_rows() -> Vec<Value> {
        let s = |v: Value| Value::Struct(vec![v]);
        vec![
            s(Value::List(vec!["AB".into(), "C".into()])),
            s(Value::Null),
            Value::Null,
            s(Value::List(vec![Value::Null])),
            s(Value::List(vec![])),
        ]
    }

    #[test]
    fn example_levels() {
        let field = example_field();
        let array = LogicalArray::from_values(&field.data_type, &example_rows()).unwrap();
        let levels = shred(&field, &array).unwrap();
        assert_eq!(levels.len(), 1);
        let lv = &levels[0];
        let pairs: Vec<(u16, u16)> = lv.rep.iter().copied().zip(lv.def.iter().copied()).collect();
        assert_eq!(pairs, vec![(1, 0), (0, 0), (1, 3), (1, 4), (1, 1), (1, 2)]);
        assert_eq!(lv.values.iter().collect::<Vec<_>>(), vec![b"AB".as_slice(), b"C"]);
        assert_eq!(lv.num_rows(), 5);
        assert_eq!(unshred(&field, &levels).unwrap(), array);
    }

    #[test]
    fn flat_non_nullable() {
        let field = Field::new("x", DataType::UInt64, false);
        let array = LogicalArray::from_values(&DataType::UInt64, &[Value::UInt(7), Value::UInt(8)]).unwrap();
        let lv = &shred(&field, &array).unwrap()[0];
        assert_eq!((lv.max_rep, lv.max_def), (0, 0));
        assert_eq!(lv.rep, vec![0, 0]);
        assert_eq!(lv.def, vec![0, 0]);
        assert_eq!(lv.values.get(1), 8u64.to_le_bytes());
    }

    #[test]
    fn nullable_utf8() {
        let field = Field::new("x", DataType::Utf8, true);
        let array = LogicalArray::from_values(&DataType::Utf8, &["x".into(), Value::Null]).unwrap();
        let lv = &shred(&field, &array).unwrap()[0];
        assert_eq!(lv.max_def, 1);
        assert_eq!(lv.def, vec![0, 1]);
        assert_eq!(lv.values.len(), 1);
    }

    #[test]
    fn empty_levels_unshred_to_empty_array() {
        let field = Field::new("x", DataType::UInt64, false);
        let lv = leaf_paths(&field)[0].empty_levels();
        let out = unshred(&field, &[lv]).unwrap();
        assert_eq!(out.len(), 0);
    }

    #[test]
    fn widths_examples() {
        assert_eq!(level_widths(&example_field()), LevelWidths { rep_bits: 1, def_bits: 3 });
        assert_eq!(
            level_widths(&Field::new("x", DataType::UInt64, false)),
            LevelWidths { rep_bits: 0, def_bits: 0 }
        );
        let ll = Field::new(
            "x",
            DataType::list(DataType::list(DataType::Utf8, true), true),
            true,
        );
        let p = &leaf_paths(&ll)[0];
        assert_eq!((p.max_rep, p.max_def), (2, 5));
        assert_eq!(level_widths(&ll), LevelWidths { rep_bits: 2, def_bits: 3 });
    }

    #[test]
    fn nested_lists_rep_levels() {
        let ll = Field::new("x", DataType::list(DataType::list(DataType::UInt8, false), true), false);
        let rows = vec![
            Value::List(vec![
                Value::List(vec![Value::UInt(1), Value::UInt(2)]),
                Value::Null,
                Value::List(vec![]),
            ]),
            Value::List(vec![]),
        ];
        let array = LogicalArray::from_values(&ll.data_type, &rows).unwrap();
        let lv = &shred(&ll, &array).unwrap()[0];
        // defs: valid 0, inner empty 1, inner null 2, outer empty 3
        assert_eq!(lv.rep, vec![2, 0, 1, 1, 2]);
        assert_eq!(lv.def, vec![0, 0, 2, 1, 3]);
        assert_eq!(unshred(&ll, std::slice::from_ref(lv)).unwrap(), array);
    }

    #[test]
    fn multi_leaf_struct_round_trip() {
        let field = Field::new(
            "s",
            DataType::Struct(vec![
                Field::new("a", DataType::list(DataType::UInt16, true), true),
                Field::new("b", DataType::Utf8, false),
            ]),
            true,
        );
        let rows = vec![
            Value::Struct(vec![Value::List(vec![Value::UInt(1), Value::Null]), "x".into()]),
            Value::Null,
            Value::Struct(vec![Value::Null, "".into()]),
            Value::Struct(vec![Value::List(vec![]), "yz".into()]),
        ];
        let array = LogicalArray::from_values(&field.data_type, &rows).unwrap();
        let levels = shred(&field, &array).unwrap();
        assert_eq!(levels.len(), 2);
        assert_eq!(levels[1].def, vec![0, 1, 0, 0]);
        assert_eq!(unshred(&field, &levels).unwrap(), array);
    }

    #[test]
    fn corrupt_levels_rejected() {
        let field = Field::new("x", DataType::Utf8, true);
        let mut lv = leaf_paths(&field)[0].empty_levels();
        lv.push(0, 2);
        assert!(matches!(unshred(&field, &[lv]), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn fixed_size_list_is_a_leaf() {
        let field = Field::new("v", DataType::fixed_size_list(DataType::Float32, 3), true);
        let p = &leaf_paths(&field)[0];
        assert_eq!((p.max_rep, p.max_def), (0, 1));
        let row = Value::List(vec![Value::Float32(1.0), Value::Float32(2.0), Value::Float32(3.0)]);
        let array = LogicalArray::from_values(&field.data_type, &[row, Value::Null]).unwrap();
        let levels = shred(&field, &array).unwrap();
        assert_eq!(levels[0].values.len(), 1);
        assert_eq!(levels[0].values.get(0).len(), 12);
        assert_eq!(unshred(&field, &levels).unwrap(), array);
    }
}
