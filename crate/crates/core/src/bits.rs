//! Word-level helpers for packed bit rows (least significant bit = item 0).

pub(crate) const WORD_BITS: usize = 64;

#[inline]
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

#[inline]
pub(crate) fn test(words: &[u64], bit: usize) -> bool {
    words[bit / WORD_BITS] >> (bit % WORD_BITS) & 1 == 1
}

#[inline]
pub(crate) fn set(words: &mut [u64], bit: usize) {
    words[bit / WORD_BITS] |= 1u64 << (bit % WORD_BITS);
}

/// Iterates the positions of set bits in ascending order.
pub(crate) fn iter_ones(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(w, &word)| {
        let mut rest = word;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let tz = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(w * WORD_BITS + tz)
        })
    })
}

#[inline]
pub(crate) fn popcount(words: &[u64]) -> u64 {
    words.iter().map(|w| u64::from(w.count_ones())).sum()
}

/// Mask of valid bits in the last word of a row of `bits` width.
#[inline]
pub(crate) fn tail_mask(bits: usize) -> u64 {
    match bits % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}
