// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The zipcol Authors

//! Bit packing (LSB first) and byte-aligned integer packing.

use crate::{Error, Result};

/// Bytes needed to hold `count` values of `bit_width` bits.
pub fn packed_len(count: usize, bit_width: u8) -> usize {
    (count * bit_width as usize).div_ceil(8)
}

pub fn pack(values: impl IntoIterator<Item = u64>, bit_width: u8, out: &mut Vec<u8>) {
    debug_assert!(bit_width <= 64);
    if bit_width == 0 {
        return;
    }
    let mask = if bit_width == 64 { u64::MAX } else { (1u64 << bit_width) - 1 };
    let mut acc: u128 = 0;
    let mut bits = 0u32;
    for v in values {
        acc |= ((v & mask) as u128) << bits;
        bits += bit_width as u32;
        while bits >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            bits -= 8;
        }
    }
    if bits > 0 {
        out.push(acc as u8);
    }
}

/// Value `i` of a packed buffer; the caller guarantees it is in bounds.
#[inline]
pub fn get(bytes: &[u8], bit_width: u8, i: usize) -> u64 {
    if bit_width == 0 {
        return 0;
    }
    let start_bit = i * bit_width as usize;
    let first = start_bit / 8;
    let last = (start_bit + bit_width as usize).div_ceil(8);
    let mut acc: u128 = 0;
    for (k, b) in bytes[first..last].iter().enumerate() {
        acc |= (*b as u128) << (8 * k);
    }
    let v = acc >> (start_bit % 8);
    if bit_width == 64 {
        v as u64
    } else {
        (v as u64) & ((1u64 << bit_width) - 1)
    }
}

pub fn unpack(bytes: &[u8], bit_width: u8, count: usize) -> Result<Vec<u64>> {
    let need = packed_len(count, bit_width);
    if bytes.len() < need {
        return Err(Error::corrupt(
            bytes.len() as u64,
            format!("bit-packed buffer holds {} bytes, {count} values of {bit_width} bits need {need}", bytes.len()),
        ));
    }
    Ok((0..count).map(|i| get(bytes, bit_width, i)).collect())
}

/// Smallest byte width (1..=8) that holds `max`.
pub fn byte_width_for(max: u64) -> u8 {
    (((64 - max.leading_zeros()) as u8).div_ceil(8)).max(1)
}

pub fn write_uint(value: u64, width: u8, out: &mut Vec<u8>) {
    out.extend_from_slice(&value.to_le_bytes()[..width as usize]);
}

#[inline]
pub fn read_uint(bytes: &[u8], width: u8) -> u64 {
    let mut buf = [0u8; 8];
    buf[..width as usize].copy_from_slice(&bytes[..width as usize]);
    u64::from_le_bytes(buf)
}

/// Little-endian unsigned value of up to 8 bytes.
#[inline]
pub fn le_to_u64(bytes: &[u8]) -> u64 {
    read_uint(bytes, bytes.len() as u8)
}
