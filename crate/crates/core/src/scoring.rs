//! Similarity, score and preference functions, and the superiority relation.
//!
//! Superiority is decided on the full linear feature vector `phi(o)`
//! (proximity plus one weighted-similarity coordinate per query word): `a`
//! is superior to `b` when every coordinate of `phi(a)` is at least the
//! matching coordinate of `phi(b)` and one is strictly larger. That is
//! exactly the condition under which `a` outranks `b` for every nonnegative
//! preference vector, so k-superior sets contain every preference top-k.

use crate::model::{Frame, GeoObject, Location, PreferenceVector, Query, ScorePair, WordSet};
use crate::num::Scalar;

/// Normalized closeness: `1 - dist / d_max`, clamped to `[0, 1]`.
pub fn geo_proximity<T: Scalar>(q: Location<T>, o: Location<T>, frame: &Frame<T>) -> T {
    proximity_from_distance(frame.distance(q, o), frame.d_max)
}

pub fn proximity_from_distance<T: Scalar>(dist: T, d_max: T) -> T {
    if d_max <= T::zero() {
        return T::one();
    }
    (T::one() - dist / d_max).max(T::zero()).min(T::one())
}

/// Jaccard similarity of two word sets; two empty sets score 0.
pub fn set_similarity<T: Scalar>(a: &WordSet, b: &WordSet) -> T {
    let inter = a.intersection_len(b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        T::zero()
    } else {
        T::from_count(inter) / T::from_count(union)
    }
}

/// Weighted numerator over `q ∩ o`, fixed denominator `|q ∪ o|`.
///
/// `pw[i]` weighs the i-th word of `q_words` (ascending order).
pub fn weighted_similarity<T: Scalar>(q_words: &WordSet, o_words: &WordSet, pw: &[T]) -> T {
    debug_assert_eq!(pw.len(), q_words.len());
    let union = q_words.union_len(o_words);
    if union == 0 {
        return T::zero();
    }
    let num = q_words
        .iter()
        .zip(pw)
        .filter(|(w, _)| o_words.contains(*w))
        .fold(T::zero(), |acc, (_, &p)| acc + p);
    num / T::from_count(union)
}

pub fn f_score<T: Scalar>(q: &Query<T>, o: &GeoObject<T>, frame: &Frame<T>) -> T {
    let prox = geo_proximity(q.location, o.location, frame);
    let sim: T = set_similarity(&q.words, &o.words);
    q.lambda * prox + (T::one() - q.lambda) * sim
}

pub fn f_prefer<T: Scalar>(
    q: &Query<T>,
    o: &GeoObject<T>,
    p: &PreferenceVector<T>,
    frame: &Frame<T>,
) -> T {
    p.p0 * geo_proximity(q.location, o.location, frame) + weighted_similarity(&q.words, &o.words, &p.pw)
}

/// `phi(o)`, length `t + 1`; `f_prefer(q, o, p) == p . phi(o)`.
pub fn feature_map<T: Scalar>(q: &Query<T>, o: &GeoObject<T>, frame: &Frame<T>) -> Vec<T> {
    let mut phi = Vec::with_capacity(q.words.len() + 1);
    phi.push(geo_proximity(q.location, o.location, frame));
    let union = q.words.union_len(&o.words);
    let share = if union == 0 {
        T::zero()
    } else {
        T::one() / T::from_count(union)
    };
    phi.extend(q.words.iter().map(|w| if o.words.contains(w) { share } else { T::zero() }));
    phi
}

/// Bitset over the positions of a query's words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct WordMask(Box<[u64]>);

impl WordMask {
    pub fn empty(t: usize) -> Self {
        Self(vec![0; t.div_ceil(64)].into_boxed_slice())
    }

    pub fn full(t: usize) -> Self {
        let mut m = Self::empty(t);
        (0..t).for_each(|i| m.set(i));
        m
    }

    /// Marks the query positions of every query word contained in `words`.
    pub fn of(q_words: &WordSet, words: &WordSet) -> Self {
        let mut m = Self::empty(q_words.len());
        let (a, b) = (q_words.as_slice(), words.as_slice());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    m.set(i);
                    i += 1;
                    j += 1;
                }
            }
        }
        m
    }

    pub fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn is_subset_of(&self, other: &WordMask) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a & !b == 0)
    }
}

/// Everything the superiority test needs about one object (or one node bound).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreProfile<T: Scalar> {
    pub pair: ScorePair<T>,
    /// Query words present in the object.
    pub matched: WordMask,
    /// `|q ∪ o|`.
    pub union: usize,
}

impl<T: Scalar> ScoreProfile<T> {
    pub fn of(q: &Query<T>, o: &GeoObject<T>, frame: &Frame<T>) -> Self {
        let matched = WordMask::of(&q.words, &o.words);
        let inter = matched.count();
        let union = q.words.len() + o.words.len() - inter;
        let similarity = if union == 0 {
            T::zero()
        } else {
            T::from_count(inter) / T::from_count(union)
        };
        Self {
            pair: ScorePair::new(geo_proximity(q.location, o.location, frame), similarity),
            matched,
            union,
        }
    }

    /// Weakly better-or-equal on every feature coordinate.
    fn covers(&self, other: &Self) -> bool {
        self.pair.proximity >= other.pair.proximity
            && other.matched.is_subset_of(&self.matched)
            && (other.matched.is_empty() || self.union <= other.union)
    }
}

/// Outcome of comparing two profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominanceOutcome {
    FirstDominates,
    SecondDominates,
    Incomparable,
    Equal,
}

pub fn dominance<T: Scalar>(a: &ScoreProfile<T>, b: &ScoreProfile<T>) -> DominanceOutcome {
    match (a.covers(b), b.covers(a)) {
        (true, true) => DominanceOutcome::Equal,
        (true, false) => DominanceOutcome::FirstDominates,
        (false, true) => DominanceOutcome::SecondDominates,
        (false, false) => DominanceOutcome::Incomparable,
    }
}

/// True when `a` is superior to `b`.
pub fn dominates<T: Scalar>(a: &ScoreProfile<T>, b: &ScoreProfile<T>) -> bool {
    a.covers(b) && !b.covers(a)
}
