//! Packed bit vectors.
//!
//! `BitVector` is the common currency of the crate: channel observations,
//! syndromes, keys, nonces, identifiers and PUF responses are all bit
//! sequences. Bits are stored LSB-first inside bytes; unused bits of the
//! final byte are kept at zero so equality and hashing can work on the raw
//! storage.

use rand::Rng;
use std::cmp::Ordering;
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    data: Vec<u8>,
    len: usize,
}

impl BitVector {
    /// All-zero vector of `len` bits.
    pub fn zeros(len: usize) -> Self {
        BitVector {
            data: vec![0u8; len.div_ceil(8)],
            len,
        }
    }

    /// Uniformly random vector of `len` bits.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        let mut v = BitVector::zeros(len);
        rng.fill_bytes(&mut v.data);
        v.mask_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = BitVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    /// Builds from a slice of 0/1 values.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = BitVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            debug_assert!(b <= 1);
            if b != 0 {
                v.set(i, true);
            }
        }
        v
    }

    /// Interprets `len` low bits of `value`, bit 0 first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut v = BitVector::zeros(len);
        for i in 0..len {
            if (value >> i) & 1 == 1 {
                v.set(i, true);
            }
        }
        v
    }

    /// Reconstructs from packed little-endian bytes produced by
    /// [`BitVector::as_bytes`].
    pub fn from_bytes(bytes: &[u8], len: usize) -> Self {
        assert_eq!(bytes.len(), len.div_ceil(8), "byte count mismatch");
        let mut v = BitVector {
            data: bytes.to_vec(),
            len,
        };
        v.mask_tail();
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.data[i / 8] >> (i % 8)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u8 << (i % 8);
        if value {
            self.data[i / 8] |= mask;
        } else {
            self.data[i / 8] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.data[i / 8] ^= 1u8 << (i % 8);
    }

    /// Packed storage, LSB-first within each byte, tail bits zero.
    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Expands to one 0/1 byte per bit; convenient for decoder inner loops.
    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn hamming_distance(&self, other: &BitVector) -> usize {
        assert_eq!(self.len, other.len, "length mismatch in hamming_distance");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn xor(&self, other: &BitVector) -> BitVector {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a ^ b)
            .collect();
        BitVector {
            data,
            len: self.len,
        }
    }

    pub fn concat(parts: &[&BitVector]) -> BitVector {
        let len = parts.iter().map(|p| p.len).sum();
        let mut out = BitVector::zeros(len);
        let mut pos = 0;
        for part in parts {
            for i in 0..part.len {
                if part.get(i) {
                    out.set(pos + i, true);
                }
            }
            pos += part.len;
        }
        out
    }

    /// Splits into `[0, mid)` and `[mid, len)`.
    pub fn split_at(&self, mid: usize) -> (BitVector, BitVector) {
        assert!(mid <= self.len);
        (self.slice(0, mid), self.slice(mid, self.len))
    }

    /// Copies bits `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> BitVector {
        assert!(start <= end && end <= self.len);
        let mut out = BitVector::zeros(end - start);
        for i in start..end {
            if self.get(i) {
                out.set(i - start, true);
            }
        }
        out
    }

    /// First `len` bits.
    pub fn truncate(&self, len: usize) -> BitVector {
        self.slice(0, len)
    }

    /// Lowercase hex of the packed bytes.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.data.len() * 2);
        for b in &self.data {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    fn mask_tail(&mut self) {
        let used = self.len % 8;
        if used != 0 {
            if let Some(last) = self.data.last_mut() {
                *last &= (1u8 << used) - 1;
            }
        }
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
            write!(f, "BitVector<{}>({s})", self.len)
        } else {
            write!(f, "BitVector<{}>({}...)", self.len, &self.to_hex()[..16])
        }
    }
}

impl PartialOrd for BitVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic order on the bit sequence, index 0 most significant.
impl Ord for BitVector {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.iter().zip(other.iter()) {
            match (a, b) {
                (false, true) => return Ordering::Less,
                (true, false) => return Ordering::Greater,
                _ => {}
            }
        }
        self.len.cmp(&other.len)
    }
}

impl std::ops::BitXor for &BitVector {
    type Output = BitVector;
    fn bitxor(self, rhs: &BitVector) -> BitVector {
        self.xor(rhs)
    }
}
