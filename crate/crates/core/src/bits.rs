//! Fixed-length bit strings used as computational-basis labels.
//!
//! Bit `i` of a [`BitString`] is the state of qubit (or lattice site) `i`, and
//! qubit 0 is the least significant bit of [`BitString::index`]. The textual
//! form prints the string as a binary number, so qubit 0 is the rightmost
//! character: `"10"` on two qubits means `x_0 = 0, x_1 = 1` (index 2).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported string length.
pub const MAX_BITS: usize = 63;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct BitString {
    value: u64,
    len: u8,
}

impl BitString {
    /// All-zero string of length `len`.
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_BITS, "bit strings are limited to {MAX_BITS} bits");
        BitString { value: 0, len: len as u8 }
    }

    /// String whose integer encoding is `index`.
    pub fn from_index(index: u64, len: usize) -> Result<Self> {
        if len > MAX_BITS || (len < 64 && index >> len != 0) {
            return Err(Error::BadBitString(format!("index {index} does not fit in {len} bits")));
        }
        Ok(BitString { value: index, len: len as u8 })
    }

    /// Builds a string from per-site values, `bits[i]` being `x_i` (0 or 1).
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() > MAX_BITS {
            return Err(Error::BadBitString(format!("{} bits is too long", bits.len())));
        }
        let mut value = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => value |= 1 << i,
                other => return Err(Error::BadBitString(format!("bit {i} has value {other}"))),
            }
        }
        Ok(BitString { value, len: bits.len() as u8 })
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index(&self) -> u64 {
        self.value
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        self.value >> i & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len());
        if bit {
            self.value |= 1 << i;
        } else {
            self.value &= !(1 << i);
        }
    }

    /// Site values `x_0, x_1, ...` as 0/1 bytes.
    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.get(i) as u8).collect()
    }

    /// Iterates over all `2^len` strings in index order.
    pub fn all(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len <= 30, "enumeration over {len} bits is not supported");
        (0..1u64 << len).map(move |value| BitString { value, len: len as u8 })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.len()).rev() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .rev()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::BadBitString(s.to_string())),
            })
            .collect::<Result<Vec<u8>>>()?;
        BitString::from_bits(&bits)
    }
}
