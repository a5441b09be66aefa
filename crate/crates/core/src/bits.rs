//! Word-level helpers for occupancy bit-sets.
//!
//! Site `s` lives in word `s / 64`, bit `s % 64`. Comparisons treat the
//! highest word as most significant, so the ordering of two bit-sets of the
//! same length is the numeric ordering of the integers they encode.

use std::cmp::Ordering;
use std::hash::Hash;

pub(crate) const WORD_BITS: usize = 64;

#[inline]
pub(crate) fn words_for(sites: usize) -> usize {
    sites.div_ceil(WORD_BITS).max(1)
}

#[inline]
pub(crate) fn test(words: &[u64], site: usize) -> bool {
    (words[site / WORD_BITS] >> (site % WORD_BITS)) & 1 == 1
}

#[inline]
pub(crate) fn set(words: &mut [u64], site: usize) {
    words[site / WORD_BITS] |= 1 << (site % WORD_BITS);
}

#[inline]
pub(crate) fn clear(words: &mut [u64], site: usize) {
    words[site / WORD_BITS] &= !(1 << (site % WORD_BITS));
}

#[inline]
pub(crate) fn popcount(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

pub(crate) fn numeric_cmp(a: &[u64], b: &[u64]) -> Ordering {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Iterate the set bits of a word slice in increasing site order.
pub(crate) fn ones(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(k, &w)| {
        let mut rest = w;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(k * WORD_BITS + bit)
            }
        })
    })
}

/// Fixed-width copy of a bit-set used as a hash key during graph searches.
///
/// `N` is chosen at runtime from the lattice size; unused high words are
/// zero.
pub(crate) trait PackedKey: Copy + Eq + Hash + Send + Sync {
    fn pack(words: &[u64]) -> Self;
    fn as_words(&self) -> &[u64];
}

impl<const N: usize> PackedKey for [u64; N] {
    #[inline]
    fn pack(words: &[u64]) -> Self {
        let mut key = [0u64; N];
        key[..words.len()].copy_from_slice(words);
        key
    }

    #[inline]
    fn as_words(&self) -> &[u64] {
        self.as_slice()
    }
}

/// Largest number of words handled by [`PackedKey`] dispatch.
pub(crate) const MAX_PACKED_WORDS: usize = 16;

/// Run `$body` with `$key` bound to the narrowest `[u64; N]` that holds
/// `$words` words.
macro_rules! with_packed_key {
    ($words:expr, $key:ident => $body:expr) => {{
        match $words {
            1 => {
                type $key = [u64; 1];
                $body
            }
            2 => {
                type $key = [u64; 2];
                $body
            }
            3 | 4 => {
                type $key = [u64; 4];
                $body
            }
            5..=8 => {
                type $key = [u64; 8];
                $body
            }
            9..=16 => {
                type $key = [u64; 16];
                $body
            }
            w => {
                return Err($crate::Error::InvalidParameter(format!(
                    "lattice needs {w} words per configuration; at most {} supported",
                    $crate::bits::MAX_PACKED_WORDS
                )))
            }
        }
    }};
}
pub(crate) use with_packed_key;
