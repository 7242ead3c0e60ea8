use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{GirTree, NodeKind};
use crate::model::Query;
use crate::num::{total_cmp, Scalar};
use crate::scoring::{dominates, ScoreProfile};
use crate::signature::QuerySignatures;

/// One member of a k-superior set.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T: Scalar> {
    /// Position in the tree's object table.
    pub index: usize,
    pub id: u64,
    pub profile: ScoreProfile<T>,
}

enum Item {
    Node(usize),
    Entry { node: usize, slot: usize },
}

struct Queued<T: Scalar> {
    key: T,
    seq: usize,
    item: Item,
}

impl<T: Scalar> PartialEq for Queued<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Queued<T> {}

impl<T: Scalar> PartialOrd for Queued<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Queued<T> {
    // Max-heap on key; earlier insertions first among equal keys.
    fn cmp(&self, other: &Self) -> Ordering {
        total_cmp(self.key, other.key).then(other.seq.cmp(&self.seq))
    }
}

fn has_k_dominators<T: Scalar>(set: &[Candidate<T>], p: &ScoreProfile<T>, k: usize) -> bool {
    let mut n = 0;
    for c in set {
        if dominates(&c.profile, p) {
            n += 1;
            if n >= k {
                return true;
            }
        }
    }
    false
}

/// Best-first search for every object with fewer than `q.k` superiors.
///
/// Subtrees whose optimistic profile is already dominated by `k` found
/// objects are skipped. Output is sorted by id.
pub fn gi_super_search<T: Scalar>(tree: &GirTree<T>, q: &Query<T>) -> Vec<Candidate<T>> {
    let k = q.k;
    let qs = QuerySignatures::new(&q.words, tree.sig_cfg());
    let mut found: Vec<Candidate<T>> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut push = |heap: &mut BinaryHeap<Queued<T>>, key: T, item: Item| {
        heap.push(Queued { key, seq, item });
        seq += 1;
    };
    push(&mut heap, tree.f_sort_with(q, &qs, tree.root()), Item::Node(tree.root()));

    while let Some(Queued { item, .. }) = heap.pop() {
        match item {
            Item::Node(n) => match &tree.node(n).kind {
                NodeKind::Internal(children) => {
                    for &c in children {
                        let bound = tree.bound_profile(q, &qs, c);
                        if !has_k_dominators(&found, &bound, k) {
                            push(&mut heap, bound.pair.sum(), Item::Node(c));
                        }
                    }
                }
                NodeKind::Leaf(entries) => {
                    for (slot, e) in entries.iter().enumerate() {
                        let p = ScoreProfile::of(q, tree.object(e.object), tree.frame());
                        push(&mut heap, p.pair.sum(), Item::Entry { node: n, slot });
                    }
                }
            },
            Item::Entry { node, slot } => {
                let NodeKind::Leaf(entries) = &tree.node(node).kind else {
                    unreachable!("entries only come from leaves")
                };
                let index = entries[slot].object;
                let object = tree.object(index);
                let profile = ScoreProfile::of(q, object, tree.frame());
                if !has_k_dominators(&found, &profile, k) {
                    found.push(Candidate { index, id: object.id, profile });
                }
            }
        }
    }

    // Heap ties can admit an object before its superiors; recount over the
    // final set.
    let keep: Vec<bool> = found
        .iter()
        .map(|c| !has_k_dominators(&found, &c.profile, k))
        .collect();
    let mut out: Vec<Candidate<T>> = found
        .into_iter()
        .zip(keep)
        .filter_map(|(c, keep)| keep.then_some(c))
        .collect();
    out.sort_by_key(|c| c.id);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeoObject, Location, WordSet};
    use crate::signature::SignatureConfig;

    fn obj(id: u64, x: f64, words: &[u32]) -> GeoObject<f64> {
        GeoObject::new(id, Location::new(x, 0.0), WordSet::from_iter(words.iter().copied()))
    }

    #[test]
    fn k_at_least_n_returns_everything() {
        let objs: Vec<_> = (0..30).map(|i| obj(i, i as f64 * 0.1, &[1, (i % 3) as u32])).collect();
        let t = GirTree::build(objs, 4, SignatureConfig::default()).unwrap();
        let q = Query::new(Location::new(0.0, 0.0), WordSet::from_iter([1, 2])).with_k(30);
        assert_eq!(gi_super_search(&t, &q).len(), 30);
    }

    #[test]
    fn incomparable_objects_all_returned() {
        // farther objects match strictly more query words
        let objs: Vec<_> = (0..10u64)
            .map(|i| obj(i, i as f64, &(0..=i as u32).collect::<Vec<_>>()))
            .collect();
        let t = GirTree::build(objs, 3, SignatureConfig::default()).unwrap();
        let q = Query::new(Location::new(0.0, 0.0), WordSet::from_iter(0..10)).with_k(1);
        assert_eq!(gi_super_search(&t, &q).len(), 10);
    }

    #[test]
    fn chain_keeps_first_k() {
        let objs: Vec<_> = (0..10u64).map(|i| obj(i, i as f64, &[1])).collect();
        let t = GirTree::build(objs, 3, SignatureConfig::default()).unwrap();
        let q = Query::new(Location::new(0.0, 0.0), WordSet::from_iter([1])).with_k(3);
        let ids: Vec<u64> = gi_super_search(&t, &q).iter().map(|c| c.id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }
}
