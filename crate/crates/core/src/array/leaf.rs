// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

use std::ops::Range;

/// Flattened leaf payload with nulls removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeafValues {
    Fixed { width: usize, data: Vec<u8> },
    Variable { offsets: Vec<u64>, data: Vec<u8> },
}

impl LeafValues {
    pub fn new_fixed(width: usize) -> Self {
        assert!(width > 0, "fixed leaf width must be positive");
        Self::Fixed {
            width,
            data: Vec::new(),
        }
    }

    pub fn new_variable() -> Self {
        Self::Variable {
            offsets: vec![0],
            data: Vec::new(),
        }
    }

    /// An empty container of the same shape.
    pub fn empty_like(&self) -> Self {
        match self {
            Self::Fixed { width, .. } => Self::new_fixed(*width),
            Self::Variable { .. } => Self::new_variable(),
        }
    }

    pub fn fixed_width(&self) -> Option<usize> {
        match self {
            Self::Fixed { width, .. } => Some(*width),
            Self::Variable { .. } => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Fixed { width, data } => data.len() / width,
            Self::Variable { offsets, .. } => offsets.len() - 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bytes of value payload, excluding offsets.
    pub fn data_len(&self) -> usize {
        match self {
            Self::Fixed { data, .. } | Self::Variable { data, .. } => data.len(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[u8] {
        match self {
            Self::Fixed { width, data } => &data[i * width..(i + 1) * width],
            Self::Variable { offsets, data } => {
                &data[offsets[i] as usize..offsets[i + 1] as usize]
            }
        }
    }

    pub fn push(&mut self, value: &[u8]) {
        match self {
            Self::Fixed { width, data } => {
                assert_eq!(value.len(), *width, "fixed leaf value has wrong width");
                data.extend_from_slice(value);
            }
            Self::Variable { offsets, data } => {
                data.extend_from_slice(value);
                offsets.push(data.len() as u64);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        match self {
            Self::Fixed { width, data } => Self::Fixed {
                width: *width,
                data: data[range.start * width..range.end * width].to_vec(),
            },
            Self::Variable { offsets, data } => {
                let base = offsets[range.start];
                let end = offsets[range.end];
                Self::Variable {
                    offsets: offsets[range.start..=range.end]
                        .iter()
                        .map(|o| o - base)
                        .collect(),
                    data: data[base as usize..end as usize].to_vec(),
                }
            }
        }
    }

    pub fn extend(&mut self, other: &LeafValues) {
        match (self, other) {
            (Self::Fixed { width, data }, Self::Fixed { width: w2, data: d2 }) => {
                assert_eq!(width, w2, "cannot concatenate leaves of different widths");
                data.extend_from_slice(d2);
            }
            (Self::Variable { offsets, data }, Self::Variable { offsets: o2, data: d2 }) => {
                let base = data.len() as u64;
                offsets.extend(o2[1..].iter().map(|o| o + base));
                data.extend_from_slice(d2);
            }
            _ => panic!("cannot concatenate fixed and variable leaves"),
        }
    }

    pub fn max_value_len(&self) -> usize {
        match self {
            Self::Fixed { width, .. } => *width,
            Self::Variable { offsets, .. } => offsets
                .windows(2)
                .map(|w| (w[1] - w[0]) as usize)
                .max()
                .unwrap_or(0),
        }
    }
}
