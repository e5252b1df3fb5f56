use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

/// A fixed-length vector over F₂, packed least-significant-bit first into
/// 64-bit words. Bits past `len` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = BitVec {
            len,
            words: vec![u64::MAX; words_for(len)],
        };
        v.clear_tail();
        v
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(len: usize, indices: I) -> Self {
        let mut v = BitVec::zeros(len);
        for i in indices {
            v.flip(i);
        }
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = BitVec::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    /// Wraps raw words; stray bits beyond `len` are cleared.
    pub fn from_words(len: usize, mut words: Vec<u64>) -> Self {
        words.resize(words_for(len), 0);
        let mut v = BitVec { len, words };
        v.clear_tail();
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    /// Hamming weight.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        assert_eq!(self.len, other.len, "xor of bit vectors with different lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &BitVec) -> BitVec {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    pub fn and(&self, other: &BitVec) -> BitVec {
        assert_eq!(self.len, other.len, "and of bit vectors with different lengths");
        BitVec {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    /// Parity of the inner product ⟨self, other⟩ over F₂.
    pub fn dot(&self, other: &BitVec) -> bool {
        assert_eq!(self.len, other.len, "dot of bit vectors with different lengths");
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        ones & 1 == 1
    }

    /// Copies bits `start..start + len` into a new vector.
    pub fn slice(&self, start: usize, len: usize) -> BitVec {
        assert!(start + len <= self.len, "slice {start}..{} out of range", start + len);
        let shift = start % WORD_BITS;
        let first = start / WORD_BITS;
        let mut words = Vec::with_capacity(words_for(len));
        for k in 0..words_for(len) {
            let lo = self.words.get(first + k).copied().unwrap_or(0) >> shift;
            let hi = if shift == 0 {
                0
            } else {
                self.words.get(first + k + 1).copied().unwrap_or(0) << (WORD_BITS - shift)
            };
            words.push(lo | hi);
        }
        BitVec::from_words(len, words)
    }

    /// Concatenation `self ‖ other`.
    pub fn concat(&self, other: &BitVec) -> BitVec {
        let mut out = BitVec::zeros(self.len + other.len);
        out.words[..self.words.len()].copy_from_slice(&self.words);
        for i in other.iter_ones() {
            out.set(self.len + i, true);
        }
        out
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut word = w;
            std::iter::from_fn(move || {
                if word == 0 {
                    None
                } else {
                    let tz = word.trailing_zeros() as usize;
                    word &= word - 1;
                    Some(k * WORD_BITS + tz)
                }
            })
        })
    }

    /// Bytes in little-endian order: byte `i` holds bits `8i..8i+8`, LSB first.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        self.words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(nbytes)
            .collect()
    }

    pub fn from_le_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Parse(format!(
                "expected {} bytes for {len} bits, got {}",
                len.div_ceil(8),
                bytes.len()
            )));
        }
        let words = bytes
            .chunks(8)
            .map(|c| {
                let mut buf = [0u8; 8];
                buf[..c.len()].copy_from_slice(c);
                u64::from_le_bytes(buf)
            })
            .collect();
        let v = BitVec { len, words };
        let mut cleared = v.clone();
        cleared.clear_tail();
        if cleared != v {
            return Err(Error::Parse("bits set beyond declared length".into()));
        }
        Ok(v)
    }

    /// `"<len>:<hex>"` with the hex digits of the little-endian byte encoding.
    pub fn to_hex(&self) -> String {
        format!("{}:{}", self.len, hex::encode(self.to_le_bytes()))
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let (len, digits) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("bit vector `{s}` lacks a length prefix")))?;
        let len: usize = len
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad bit length `{len}`: {e}")))?;
        let bytes = hex::decode(digits.trim()).map_err(|e| Error::Parse(e.to_string()))?;
        BitVec::from_le_bytes(len, &bytes)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec[")?;
        for i in 0..self.len {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        write!(f, "]")
    }
}

impl Serialize for BitVec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for BitVec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        BitVec::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_pair() -> impl Strategy<Value = (BitVec, BitVec)> {
        (0usize..200).prop_flat_map(|len| {
            (
                proptest::collection::vec(any::<bool>(), len),
                proptest::collection::vec(any::<bool>(), len),
            )
                .prop_map(|(a, b)| (BitVec::from_bools(&a), BitVec::from_bools(&b)))
        })
    }

    #[test]
    fn weight_of_zero_and_ones() {
        assert_eq!(BitVec::zeros(130).weight(), 0);
        assert_eq!(BitVec::ones(130).weight(), 130);
        assert_eq!(BitVec::ones(0).weight(), 0);
    }

    #[test]
    fn hex_is_little_endian() {
        let v = BitVec::from_indices(12, [0, 9]);
        assert_eq!(v.to_hex(), "12:0102");
        assert_eq!(BitVec::from_hex("12:0102").unwrap(), v);
        assert!(BitVec::from_hex("12:01f2").is_err());
        assert!(BitVec::from_hex("0102").is_err());
    }

    #[test]
    fn slice_crosses_word_boundaries() {
        let v = BitVec::from_indices(200, [3, 63, 64, 127, 150, 199]);
        let s = v.slice(60, 100);
        assert_eq!(s.iter_ones().collect::<Vec<_>>(), vec![3, 4, 67, 90]);
        assert_eq!(v.slice(0, 200), v);
        assert_eq!(v.slice(199, 1).weight(), 1);
    }

    proptest! {
        #[test]
        fn xor_laws((a, b) in arb_pair()) {
            prop_assert!(a.xor(&a).is_zero());
            prop_assert_eq!(a.xor(&b), b.xor(&a));
            prop_assert_eq!(a.xor(&b).xor(&b), a.clone());
            let ones: Vec<usize> = a.iter_ones().collect();
            prop_assert_eq!(ones.len(), a.weight());
            prop_assert_eq!(BitVec::from_indices(a.len(), ones), a.clone());
        }

        #[test]
        fn hex_round_trip((a, _b) in arb_pair()) {
            prop_assert_eq!(BitVec::from_hex(&a.to_hex()).unwrap(), a);
        }
    }
}
