//! R-tree over object locations whose nodes also carry the superimposed
//! signature of every word beneath them.

mod io;
mod search;

use std::collections::{HashMap, VecDeque};

pub use io::{load_index, read_index, save_index, write_index, INDEX_MAGIC, INDEX_VERSION};
pub use search::{gi_super_search, Candidate};

use crate::error::{Error, Result};
use crate::model::{validate_dataset, Frame, GeoObject, Location, Query, Rect};
use crate::num::{total_cmp, Scalar};
use crate::scoring::{proximity_from_distance, ScoreProfile};
use crate::signature::{sign_words, superimpose, QuerySignatures, Signature, SignatureConfig};

pub const DEFAULT_FANOUT: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct LeafEntry<T: Scalar> {
    /// Position in the tree's object table.
    pub object: usize,
    pub location: Location<T>,
    pub sig: Signature,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind<T: Scalar> {
    Internal(Vec<usize>),
    Leaf(Vec<LeafEntry<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GirNode<T: Scalar> {
    pub mbr: Rect<T>,
    pub sig: Signature,
    pub kind: NodeKind<T>,
}

impl<T: Scalar> GirNode<T> {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf(_))
    }

    pub fn fanout(&self) -> usize {
        match &self.kind {
            NodeKind::Internal(c) => c.len(),
            NodeKind::Leaf(e) => e.len(),
        }
    }
}

/// Immutable index. Nodes are stored breadth-first with the root at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GirTree<T: Scalar> {
    nodes: Vec<GirNode<T>>,
    frame: Frame<T>,
    sig_cfg: SignatureConfig,
    fanout: usize,
    objects: Vec<GeoObject<T>>,
    by_id: HashMap<u64, usize>,
}

impl<T: Scalar> GirTree<T> {
    /// Sort-tile-recursive bulk load.
    pub fn build(objects: Vec<GeoObject<T>>, fanout: usize, sig_cfg: SignatureConfig) -> Result<Self> {
        if fanout < 2 {
            return Err(Error::InvalidConfig(format!("fanout must be at least 2, got {fanout}")));
        }
        sig_cfg.validate()?;
        let summary = validate_dataset(&objects)?;

        let entries: Vec<LeafEntry<T>> = objects
            .iter()
            .enumerate()
            .map(|(i, o)| LeafEntry {
                object: i,
                location: o.location,
                sig: sign_words(&o.words, &sig_cfg),
            })
            .collect();

        // Built bottom-up into `scratch`, then relabelled breadth-first.
        let mut scratch: Vec<GirNode<T>> = Vec::new();
        let mut level: Vec<usize> = str_tiles(entries, fanout, |e| e.location)
            .into_iter()
            .map(|group| {
                let mbr = Rect::bounding(group.iter().map(|e| e.location)).expect("non-empty");
                let sig = superimpose(sig_cfg.length_bits, group.iter().map(|e| &e.sig))
                    .expect("uniform length");
                scratch.push(GirNode { mbr, sig, kind: NodeKind::Leaf(group) });
                scratch.len() - 1
            })
            .collect();
        while level.len() > 1 {
            let centers: Vec<(usize, Location<T>)> =
                level.iter().map(|&n| (n, scratch[n].mbr.center())).collect();
            level = str_tiles(centers, fanout, |c| c.1)
                .into_iter()
                .map(|group| {
                    let children: Vec<usize> = group.into_iter().map(|c| c.0).collect();
                    let mut mbr = scratch[children[0]].mbr;
                    children.iter().for_each(|&c| mbr.expand(&scratch[c].mbr));
                    let sig = superimpose(sig_cfg.length_bits, children.iter().map(|&c| &scratch[c].sig))
                        .expect("uniform length");
                    scratch.push(GirNode { mbr, sig, kind: NodeKind::Internal(children) });
                    scratch.len() - 1
                })
                .collect();
        }

        let nodes = relabel_breadth_first(scratch, level[0]);
        let by_id = objects.iter().enumerate().map(|(i, o)| (o.id, i)).collect();
        Ok(Self {
            nodes,
            frame: summary.frame,
            sig_cfg,
            fanout,
            objects,
            by_id,
        })
    }

    pub(crate) fn from_parts(
        nodes: Vec<GirNode<T>>,
        frame: Frame<T>,
        sig_cfg: SignatureConfig,
        fanout: usize,
        objects: Vec<GeoObject<T>>,
    ) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(objects.len());
        for (i, o) in objects.iter().enumerate() {
            if by_id.insert(o.id, i).is_some() {
                return Err(Error::DuplicateId(o.id));
            }
        }
        let tree = Self { nodes, frame, sig_cfg, fanout, objects, by_id };
        tree.audit()?;
        Ok(tree)
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn nodes(&self) -> &[GirNode<T>] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &GirNode<T> {
        &self.nodes[i]
    }

    pub fn frame(&self) -> &Frame<T> {
        &self.frame
    }

    pub fn d_max(&self) -> T {
        self.frame.d_max
    }

    pub fn sig_cfg(&self) -> &SignatureConfig {
        &self.sig_cfg
    }

    pub fn fanout(&self) -> usize {
        self.fanout
    }

    pub fn objects(&self) -> &[GeoObject<T>] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object(&self, index: usize) -> &GeoObject<T> {
        &self.objects[index]
    }

    pub fn object_by_id(&self, id: u64) -> Option<&GeoObject<T>> {
        self.by_id.get(&id).map(|&i| &self.objects[i])
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    /// Number of levels; a lone leaf root has height 1.
    pub fn height(&self) -> usize {
        let mut h = 1;
        let mut n = self.root();
        while let NodeKind::Internal(children) = &self.nodes[n].kind {
            n = children[0];
            h += 1;
        }
        h
    }

    /// Object-table positions of every object below `node`.
    pub fn covered_objects(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            match &self.nodes[n].kind {
                NodeKind::Internal(c) => stack.extend(c.iter().copied()),
                NodeKind::Leaf(e) => out.extend(e.iter().map(|e| e.object)),
            }
        }
        out
    }

    /// Proximity of the MBR point nearest the query location.
    pub fn max_proximity(&self, q: &Query<T>, node: usize) -> T {
        let mbr = &self.nodes[node].mbr;
        let d = self.frame.distance(q.location, mbr.nearest_point(q.location));
        proximity_from_distance(d, self.frame.d_max)
    }

    /// Upper bound on proximity + similarity of every object under `node`.
    pub fn f_sort(&self, q: &Query<T>, node: usize) -> T {
        let qs = QuerySignatures::new(&q.words, &self.sig_cfg);
        self.f_sort_with(q, &qs, node)
    }

    pub(crate) fn f_sort_with(&self, q: &Query<T>, qs: &QuerySignatures, node: usize) -> T {
        self.max_proximity(q, node) + qs.upper_bound::<T>(&self.nodes[node].sig)
    }

    /// Optimistic profile that every object under `node` is covered by.
    pub(crate) fn bound_profile(&self, q: &Query<T>, qs: &QuerySignatures, node: usize) -> ScoreProfile<T> {
        let matched = qs.possible_words(&self.nodes[node].sig);
        let t = q.words.len();
        let similarity = T::from_count(matched.count()) / T::from_count(t);
        ScoreProfile {
            pair: crate::model::ScorePair::new(self.max_proximity(q, node), similarity),
            matched,
            union: t,
        }
    }

    /// Checks the structural invariants: containment of MBRs, signature
    /// superimposition, fanout, balance and that every object is reachable
    /// from exactly one leaf entry.
    pub fn audit(&self) -> Result<()> {
        let bad = |m: String| Err(Error::IndexFormat(m));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let mut seen = vec![false; self.objects.len()];
        let mut leaf_depth = None;
        let mut queue = VecDeque::from([(self.root(), 1usize)]);
        let mut visited = 0usize;
        while let Some((n, depth)) = queue.pop_front() {
            visited += 1;
            if visited > self.nodes.len() {
                return bad("node graph is not a tree".into());
            }
            let node = &self.nodes[n];
            if node.fanout() == 0 || node.fanout() > self.fanout {
                return bad(format!("node {n} has fanout {}", node.fanout()));
            }
            if node.sig.len_bits() != self.sig_cfg.length_bits {
                return bad(format!("node {n} signature length {}", node.sig.len_bits()));
            }
            let mut sig = Signature::zeros(self.sig_cfg.length_bits);
            match &node.kind {
                NodeKind::Internal(children) => {
                    for &c in children {
                        if c <= n || c >= self.nodes.len() {
                            return bad(format!("node {n} has invalid child {c}"));
                        }
                        if !node.mbr.contains_rect(&self.nodes[c].mbr) {
                            return bad(format!("node {n} does not contain child {c}"));
                        }
                        sig.or_assign(&self.nodes[c].sig)?;
                        queue.push_back((c, depth + 1));
                    }
                }
                NodeKind::Leaf(entries) => {
                    if *leaf_depth.get_or_insert(depth) != depth {
                        return bad("tree is not height-balanced".into());
                    }
                    for e in entries {
                        let Some(slot) = seen.get_mut(e.object) else {
                            return bad(format!("leaf entry points at missing object {}", e.object));
                        };
                        if std::mem::replace(slot, true) {
                            return bad(format!("object {} reachable twice", e.object));
                        }
                        if !node.mbr.contains(e.location) || e.location != self.objects[e.object].location {
                            return bad(format!("leaf entry for object {} misplaced", e.object));
                        }
                        sig.or_assign(&e.sig)?;
                    }
                }
            }
            if sig != node.sig {
                return bad(format!("node {n} signature is not the superimposition of its children"));
            }
        }
        if visited != self.nodes.len() {
            return bad("unreachable nodes".into());
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return bad(format!("object {i} not indexed"));
        }
        Ok(())
    }
}

/// Partitions items into groups of at most `fanout` using sort-tile-recursive
/// tiling on the key point. Produces exactly `ceil(n / fanout)` groups.
fn str_tiles<T, I, F>(mut items: Vec<I>, fanout: usize, key: F) -> Vec<Vec<I>>
where
    T: Scalar,
    F: Fn(&I) -> Location<T>,
{
    let n = items.len();
    let pages = n.div_ceil(fanout);
    let slices = (pages as f64).sqrt().ceil() as usize;
    let slice_len = slices * fanout;
    items.sort_by(|a, b| {
        let (a, b) = (key(a), key(b));
        total_cmp(a.lon, b.lon).then(total_cmp(a.lat, b.lat))
    });
    let mut out = Vec::with_capacity(pages);
    let mut rest = items;
    while !rest.is_empty() {
        let tail = rest.split_off(slice_len.min(rest.len()));
        let mut slice = std::mem::replace(&mut rest, tail);
        slice.sort_by(|a, b| {
            let (a, b) = (key(a), key(b));
            total_cmp(a.lat, b.lat).then(total_cmp(a.lon, b.lon))
        });
        while !slice.is_empty() {
            let tail = slice.split_off(fanout.min(slice.len()));
            out.push(std::mem::replace(&mut slice, tail));
        }
    }
    out
}

fn relabel_breadth_first<T: Scalar>(scratch: Vec<GirNode<T>>, root: usize) -> Vec<GirNode<T>> {
    let mut order = Vec::with_capacity(scratch.len());
    let mut queue = VecDeque::from([root]);
    while let Some(n) = queue.pop_front() {
        order.push(n);
        if let NodeKind::Internal(c) = &scratch[n].kind {
            queue.extend(c.iter().copied());
        }
    }
    let mut new_id = vec![usize::MAX; scratch.len()];
    order.iter().enumerate().for_each(|(i, &old)| new_id[old] = i);
    let mut slots: Vec<Option<GirNode<T>>> = scratch.into_iter().map(Some).collect();
    order
        .iter()
        .map(|&old| {
            let mut node = slots[old].take().expect("visited once");
            if let NodeKind::Internal(c) = &mut node.kind {
                c.iter_mut().for_each(|x| *x = new_id[*x]);
            }
            node
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WordSet;

    fn grid(n: usize) -> Vec<GeoObject<f64>> {
        (0..n)
            .map(|i| {
                GeoObject::new(
                    i as u64,
                    Location::new((i % 17) as f64 * 0.1, (i / 17) as f64 * 0.1),
                    WordSet::from_iter([(i % 13) as u32, (i % 7) as u32 + 20]),
                )
            })
            .collect()
    }

    #[test]
    fn single_object_tree() {
        let objs = grid(1);
        let cfg = SignatureConfig::default();
        let t = GirTree::build(objs.clone(), 4, cfg).unwrap();
        assert_eq!(t.height(), 1);
        assert_eq!(t.node(0).sig, sign_words(&objs[0].words, &cfg));
        assert_eq!(t.d_max(), 0.0);
    }

    #[test]
    fn height_matches_log_fanout() {
        for (n, b) in [(2, 2), (8, 2), (9, 2), (100, 4), (1000, 32), (1025, 32), (64, 8), (65, 8)] {
            let t = GirTree::build(grid(n), b, SignatureConfig::default()).unwrap();
            let mut expect = 0;
            let mut cap = 1usize;
            while cap < n {
                cap *= b;
                expect += 1;
            }
            assert_eq!(t.height(), expect.max(1), "n={n} b={b}");
            t.audit().unwrap();
        }
    }

    #[test]
    fn empty_and_bad_fanout_rejected() {
        assert!(matches!(
            GirTree::<f64>::build(vec![], 4, SignatureConfig::default()),
            Err(Error::EmptyDataset)
        ));
        assert!(GirTree::build(grid(3), 1, SignatureConfig::default()).is_err());
    }

    #[test]
    fn node_signatures_cover_children() {
        let t = GirTree::build(grid(500), 6, SignatureConfig::default()).unwrap();
        for node in t.nodes() {
            match &node.kind {
                NodeKind::Internal(c) => c.iter().for_each(|&c| assert!(node.sig.covers(&t.node(c).sig))),
                NodeKind::Leaf(e) => e.iter().for_each(|e| assert!(node.sig.covers(&e.sig))),
            }
        }
    }

    #[test]
    fn f_sort_extremes() {
        let t = GirTree::build(grid(40), 4, SignatureConfig::default()).unwrap();
        let mut root = t.node(0).clone();
        root.sig = Signature::ones(512);
        let mut t2 = t.clone();
        t2.nodes[0] = root;
        let inside = Query::new(t.node(0).mbr.center(), WordSet::from_iter([1, 2]));
        assert_eq!(t2.f_sort(&inside, 0), 2.0);
    }

    #[test]
    fn f32_tree_builds() {
        let objs: Vec<GeoObject<f32>> = grid(50)
            .into_iter()
            .map(|o| GeoObject {
                id: o.id,
                location: Location::new(o.location.lon as f32, o.location.lat as f32),
                words: o.words,
                image_url: None,
                tags: None,
            })
            .collect();
        let t = GirTree::build(objs, 4, SignatureConfig::default()).unwrap();
        t.audit().unwrap();
    }
}
