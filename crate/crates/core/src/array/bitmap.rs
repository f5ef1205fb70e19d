// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

/// Growable bitmap, least-significant bit first within each byte.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bitmap {
    bytes: Vec<u8>,
    len: usize,
}

impl Bitmap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    pub fn new_set(len: usize) -> Self {
        let mut bytes = vec![0xFF; len.div_ceil(8)];
        if !len.is_multiple_of(8) {
            if let Some(last) = bytes.last_mut() {
                *last = (1u8 << (len % 8)) - 1;
            }
        }
        Self { bytes, len }
    }

    /// Wraps raw bytes; bits beyond `len` are ignored.
    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Self {
        assert!(bytes.len() * 8 >= len, "bitmap buffer too short");
        Self { bytes, len }
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut out = Self::new();
        for b in bits {
            out.push(b);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.len.div_ceil(8)]
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.bytes[i / 8] & (1 << (i % 8)) != 0
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len);
        if value {
            self.bytes[i / 8] |= 1 << (i % 8);
        } else {
            self.bytes[i / 8] &= !(1 << (i % 8));
        }
    }

    #[inline]
    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if value {
            self.bytes[self.len / 8] |= 1 << (self.len % 8);
        }
        self.len += 1;
    }

    pub fn count_set(&self) -> usize {
        (0..self.len).filter(|&i| self.get(i)).count()
    }

    pub fn slice(&self, start: usize, len: usize) -> Bitmap {
        assert!(start + len <= self.len);
        if start.is_multiple_of(8) {
            let mut bytes = self.bytes[start / 8..(start + len).div_ceil(8)].to_vec();
            if !len.is_multiple_of(8) {
                if let Some(last) = bytes.last_mut() {
                    *last &= (1u8 << (len % 8)) - 1;
                }
            }
            return Bitmap { bytes, len };
        }
        let mut out = Bitmap::with_capacity(len);
        for i in start..start + len {
            out.push(self.get(i));
        }
        out
    }

    pub fn extend_from(&mut self, other: &Bitmap) {
        for i in 0..other.len {
            self.push(other.get(i));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}
