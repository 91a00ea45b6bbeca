//! Fixed-width transaction bitsets.
//!
//! Bits are packed into `u64` words. Bits past `len` in the last word are
//! always zero, so popcounts over whole words are exact.

use std::fmt;

const WORD_BITS: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bitset {
    words: Vec<u64>,
    len: usize,
}

impl Bitset {
    pub fn zeros(len: usize) -> Self {
        Bitset {
            words: vec![0; len.div_ceil(WORD_BITS)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = Bitset {
            words: vec![!0; len.div_ceil(WORD_BITS)],
            len,
        };
        b.clear_tail();
        b
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.len, "bit {bit} out of range for width {}", self.len);
        self.words[bit / WORD_BITS] |= 1 << (bit % WORD_BITS);
    }

    #[inline]
    pub fn get(&self, bit: usize) -> bool {
        bit < self.len && self.words[bit / WORD_BITS] >> (bit % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// In-place intersection.
    #[inline]
    pub fn and_assign(&mut self, other: &Bitset) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= *b;
        }
    }

    /// Writes `a & b` into `self`, returning the popcount of the result.
    #[inline]
    pub fn assign_and(&mut self, a: &Bitset, b: &Bitset) -> u32 {
        debug_assert!(a.len == b.len && a.len == self.len);
        let mut count = 0;
        for ((out, x), y) in self.words.iter_mut().zip(&a.words).zip(&b.words) {
            *out = x & y;
            count += out.count_ones();
        }
        count
    }

    /// Popcount of `self & other` without materialising it.
    #[inline]
    pub fn and_count(&self, other: &Bitset) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    /// True iff every bit of `self` is also set in `other`.
    #[inline]
    pub fn is_subset_of(&self, other: &Bitset) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let tz = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * WORD_BITS + tz)
            })
        })
    }
}

impl fmt::Debug for Bitset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len)
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect();
        write!(f, "Bitset({s})")
    }
}
