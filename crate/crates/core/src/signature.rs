//! Superimposed bit signatures for word sets.
//!
//! Each word hashes to `bits_per_word` positions; a set's signature is the OR
//! of its words' signatures. A query word "matches" a signature when all of
//! its bits are set, which can produce false positives but never false
//! negatives for words that were superimposed in.

use crate::error::{Error, Result};
use crate::model::WordSet;
use crate::num::Scalar;
use crate::scoring::WordMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureConfig {
    pub length_bits: usize,
    pub bits_per_word: usize,
    pub seed: u64,
}

impl Default for SignatureConfig {
    fn default() -> Self {
        Self {
            length_bits: 512,
            bits_per_word: 2,
            seed: 0,
        }
    }
}

impl SignatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bits_per_word < 1 || self.bits_per_word >= self.length_bits {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= bits_per_word ({}) < length_bits ({})",
                self.bits_per_word, self.length_bits
            )));
        }
        if self.length_bits > u32::MAX as usize {
            return Err(Error::InvalidConfig("signature too long".into()));
        }
        Ok(())
    }
}

/// Fixed-length bit string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    len_bits: usize,
    blocks: Vec<u64>,
}

impl Signature {
    pub fn zeros(len_bits: usize) -> Self {
        Self {
            len_bits,
            blocks: vec![0; len_bits.div_ceil(64)],
        }
    }

    pub fn ones(len_bits: usize) -> Self {
        let mut s = Self::zeros(len_bits);
        (0..len_bits).for_each(|i| s.set(i));
        s
    }

    /// Rebuilds a signature from raw little-endian blocks.
    pub fn from_blocks(len_bits: usize, blocks: Vec<u64>) -> Result<Self> {
        if blocks.len() != len_bits.div_ceil(64) {
            return Err(Error::IndexFormat(format!(
                "{} blocks for a {len_bits}-bit signature",
                blocks.len()
            )));
        }
        Ok(Self { len_bits, blocks })
    }

    pub fn blocks(&self) -> &[u64] {
        &self.blocks
    }

    pub fn len_bits(&self) -> usize {
        self.len_bits
    }

    pub fn set(&mut self, i: usize) {
        self.blocks[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.blocks[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Every bit set in `other` is set in `self`.
    pub fn covers(&self, other: &Signature) -> bool {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .all(|(a, b)| b & !a == 0)
    }

    pub fn or_assign(&mut self, other: &Signature) -> Result<()> {
        if self.len_bits != other.len_bits {
            return Err(Error::SignatureLength {
                left: self.len_bits,
                right: other.len_bits,
            });
        }
        self.blocks
            .iter_mut()
            .zip(&other.blocks)
            .for_each(|(a, b)| *a |= b);
        Ok(())
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn sign_word(word: u32, cfg: &SignatureConfig) -> Signature {
    let mut s = Signature::zeros(cfg.length_bits);
    let base = splitmix64(cfg.seed ^ splitmix64(word as u64));
    for i in 0..cfg.bits_per_word as u64 {
        let h = splitmix64(base.wrapping_add(i));
        s.set((h % cfg.length_bits as u64) as usize);
    }
    s
}

pub fn sign_words(words: &WordSet, cfg: &SignatureConfig) -> Signature {
    let mut s = Signature::zeros(cfg.length_bits);
    for w in words.iter() {
        s.or_assign(&sign_word(w, cfg)).expect("same config");
    }
    s
}

/// Bitwise OR of `sigs`. An empty list yields an all-zero signature of
/// `len_bits` bits.
pub fn superimpose<'a, I>(len_bits: usize, sigs: I) -> Result<Signature>
where
    I: IntoIterator<Item = &'a Signature>,
{
    let mut acc = Signature::zeros(len_bits);
    for s in sigs {
        acc.or_assign(s)?;
    }
    Ok(acc)
}

/// Per-query precomputed word signatures.
#[derive(Debug, Clone)]
pub struct QuerySignatures {
    words: Vec<Signature>,
}

impl QuerySignatures {
    pub fn new(q_words: &WordSet, cfg: &SignatureConfig) -> Self {
        Self {
            words: q_words.iter().map(|w| sign_word(w, cfg)).collect(),
        }
    }

    /// Query positions whose word signature is fully covered by `node_sig`.
    pub fn possible_words(&self, node_sig: &Signature) -> WordMask {
        let mut m = WordMask::empty(self.words.len());
        for (i, s) in self.words.iter().enumerate() {
            if node_sig.covers(s) {
                m.set(i);
            }
        }
        m
    }

    pub fn upper_bound<T: Scalar>(&self, node_sig: &Signature) -> T {
        if self.words.is_empty() {
            return T::zero();
        }
        T::from_count(self.possible_words(node_sig).count()) / T::from_count(self.words.len())
    }
}

/// Fraction of query words that may occur under a node with `node_sig`.
/// Never below the Jaccard similarity of any object superimposed into it.
pub fn similarity_upper_bound<T: Scalar>(
    q_words: &WordSet,
    node_sig: &Signature,
    cfg: &SignatureConfig,
) -> T {
    QuerySignatures::new(q_words, cfg).upper_bound(node_sig)
}
