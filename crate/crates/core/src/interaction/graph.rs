use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::girtree::Candidate;
use crate::num::Scalar;
use crate::scoring::dominates;

/// Undirected graph over a fixed vertex table. Vertex slots are dense
/// indices; `ids` is strictly ascending so slot order equals id order.
#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedGraph {
    ids: Vec<u64>,
    active: FixedBitSet,
    adj: Vec<FixedBitSet>,
}

impl UndirectedGraph {
    /// Edgeless graph on `ids`, which must be strictly ascending.
    pub fn new(ids: Vec<u64>) -> Result<Self> {
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("vertex ids must be strictly ascending".into()));
        }
        let n = ids.len();
        let mut active = FixedBitSet::with_capacity(n);
        active.insert_range(..);
        Ok(Self {
            ids,
            active,
            adj: vec![FixedBitSet::with_capacity(n); n],
        })
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.adj[a].remove(b);
        self.adj[b].remove(a);
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(b)
    }

    /// Deactivates `v` and drops its edges.
    pub fn remove_vertex(&mut self, v: usize) {
        let neighbours: Vec<usize> = self.adj[v].ones().collect();
        for u in neighbours {
            self.adj[u].remove(v);
        }
        self.adj[v].clear();
        self.active.remove(v);
    }

    pub fn slots(&self) -> usize {
        self.ids.len()
    }

    pub fn id(&self, slot: usize) -> u64 {
        self.ids[slot]
    }

    pub fn slot(&self, id: u64) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn is_active(&self, slot: usize) -> bool {
        self.active.contains(slot)
    }

    pub fn active(&self) -> &FixedBitSet {
        &self.active
    }

    pub fn active_slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.ones()
    }

    pub fn vertex_count(&self) -> usize {
        self.active.count_ones(..)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|r| r.count_ones(..)).sum::<usize>() / 2
    }

    pub fn neighbours(&self, v: usize) -> &FixedBitSet {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].count_ones(..)
    }

    /// Edges with both endpoints in `set`.
    pub fn edges_within(&self, set: &[usize]) -> usize {
        let mut n = 0;
        for (i, &a) in set.iter().enumerate() {
            for &b in &set[i + 1..] {
                n += usize::from(self.has_edge(a, b));
            }
        }
        n
    }
}

/// `2|E| / (|V| (|V| - 1))` as an exact fraction `(numerator, denominator)`.
pub fn density_fraction(vertices: usize, edges: usize) -> (u128, u128) {
    if vertices < 2 {
        return (0, 1);
    }
    (2 * edges as u128, vertices as u128 * (vertices as u128 - 1))
}

pub fn density(vertices: usize, edges: usize) -> f64 {
    let (n, d) = density_fraction(vertices, edges);
    n as f64 / d as f64
}

/// `a > b` for fractions with positive denominators.
pub(crate) fn fraction_gt(a: (u128, u128), b: (u128, u128)) -> bool {
    a.0 * b.1 > b.0 * a.1
}

/// Candidate graph: an edge joins two candidates whose relative order is
/// still unknown. `order` is the transitively closed set of known
/// "row is preferred over column" facts, seeded from superiority and grown
/// by feedback; `order_t` is its transpose.
#[derive(Debug, Clone)]
pub struct NoSuperiorGraph {
    edges: UndirectedGraph,
    order: Vec<FixedBitSet>,
    order_t: Vec<FixedBitSet>,
}

/// What one call to [`filter_candidates`] changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub facts_added: usize,
    pub edges_removed: usize,
    pub removed_vertices: Vec<u64>,
}

pub fn build_graph<T: Scalar>(candidates: &[Candidate<T>]) -> Result<NoSuperiorGraph> {
    let mut sorted: Vec<&Candidate<T>> = candidates.iter().collect();
    sorted.sort_by_key(|c| c.id);
    let n = sorted.len();
    let mut edges = UndirectedGraph::new(sorted.iter().map(|c| c.id).collect())?;
    let order: Vec<FixedBitSet> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = FixedBitSet::with_capacity(n);
                for (j, c) in sorted.iter().enumerate() {
                    if dominates(&sorted[i].profile, &c.profile) {
                        row.insert(j);
                    }
                }
                row
            })
            .collect()
    };
    let mut order_t = vec![FixedBitSet::with_capacity(n); n];
    for (i, row) in order.iter().enumerate() {
        for j in row.ones() {
            order_t[j].insert(i);
        }
    }
    for i in 0..n {
        // row i: slots that are neither above nor below i
        let mut unknown = order[i].clone();
        unknown.union_with(&order_t[i]);
        unknown.toggle_range(..);
        unknown.set_range(..i + 1, false);
        for j in unknown.ones() {
            edges.add_edge(i, j);
        }
    }
    Ok(NoSuperiorGraph { edges, order, order_t })
}

impl NoSuperiorGraph {
    pub fn edges(&self) -> &UndirectedGraph {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.edges.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.edge_count()
    }

    pub fn slot(&self, id: u64) -> Option<usize> {
        self.edges.slot(id)
    }

    pub fn id(&self, slot: usize) -> u64 {
        self.edges.id(slot)
    }

    pub fn contains(&self, id: u64) -> bool {
        self.slot(id).is_some_and(|s| self.edges.is_active(s))
    }

    /// Ids of the surviving candidates, ascending.
    pub fn vertex_ids(&self) -> Vec<u64> {
        self.edges.active_slots().map(|s| self.edges.id(s)).collect()
    }

    /// Known fact "slot `a` is preferred over slot `b`".
    pub fn knows(&self, a: usize, b: usize) -> bool {
        self.order[a].contains(b)
    }

    pub fn knows_ids(&self, a: u64, b: u64) -> bool {
        match (self.slot(a), self.slot(b)) {
            (Some(a), Some(b)) => self.knows(a, b),
            _ => false,
        }
    }

    pub(crate) fn order_row(&self, a: usize) -> &FixedBitSet {
        &self.order[a]
    }

    pub(crate) fn order_col(&self, b: usize) -> &FixedBitSet {
        &self.order_t[b]
    }

    /// Number of candidates (surviving or not) known to be preferred over `slot`.
    pub fn superiors(&self, slot: usize) -> usize {
        self.order_t[slot].count_ones(..)
    }

    /// True when the known order contains no cycle.
    pub fn is_acyclic(&self) -> bool {
        // the relation is kept closed, so a cycle shows up as a self-loop
        (0..self.order.len()).all(|i| !self.order[i].contains(i))
    }

    /// Every surviving pair has either an edge or a known order, never both.
    pub fn check_duality(&self) -> Result<(), String> {
        let active: Vec<usize> = self.edges.active_slots().collect();
        for (x, &i) in active.iter().enumerate() {
            for &j in &active[x + 1..] {
                let known = self.knows(i, j) || self.knows(j, i);
                if known == self.edges.has_edge(i, j) {
                    return Err(format!(
                        "pair ({}, {}): edge={} known={known}",
                        self.id(i),
                        self.id(j),
                        self.edges.has_edge(i, j)
                    ));
                }
            }
        }
        for i in 0..self.edges.slots() {
            if !self.edges.is_active(i) && self.edges.degree(i) > 0 {
                return Err(format!("removed vertex {} keeps edges", self.id(i)));
            }
        }
        Ok(())
    }

    /// Inserts `a ≻ b` and closes transitively. Returns the newly ordered
    /// (row set, column set) or `None` when already known.
    fn insert_fact(&mut self, a: usize, b: usize) -> Option<(FixedBitSet, FixedBitSet)> {
        if self.order[a].contains(b) {
            return None;
        }
        let mut above = self.order_t[a].clone();
        above.insert(a);
        let mut below = self.order[b].clone();
        below.insert(b);
        for x in above.ones() {
            self.order[x].union_with(&below);
        }
        for y in below.ones() {
            self.order_t[y].union_with(&above);
        }
        Some((above, below))
    }
}

/// Adds feedback facts `(chosen, rejected)` (ids), drops edges whose order
/// became known, then removes every vertex with at least `k` known
/// superiors. Fails without modifying the graph if the facts would create
/// a preference cycle.
pub fn filter_candidates(
    graph: &mut NoSuperiorGraph,
    facts: &[(u64, u64)],
    k: usize,
) -> Result<FilterReport> {
    let mut slots = Vec::with_capacity(facts.len());
    for &(a, b) in facts {
        let sa = graph.slot(a).ok_or(Error::UnknownObject(a))?;
        let sb = graph.slot(b).ok_or(Error::UnknownObject(b))?;
        if sa == sb {
            return Err(Error::InconsistentFeedback(format!("object {a} compared with itself")));
        }
        slots.push((sa, sb));
    }

    // Dry run on a copy of the order to reject cycles before mutating.
    let mut trial = graph.order.clone();
    for &(a, b) in &slots {
        if trial[b].contains(a) {
            return Err(Error::InconsistentFeedback(format!(
                "object {} is already known to be preferred over {}",
                graph.id(b),
                graph.id(a)
            )));
        }
        if trial[a].contains(b) {
            continue;
        }
        let mut below = trial[b].clone();
        below.insert(b);
        for x in 0..trial.len() {
            if x == a || trial[x].contains(a) {
                trial[x].union_with(&below);
            }
        }
    }
    drop(trial);

    let mut report = FilterReport::default();
    let before = graph.edge_count();
    for &(a, b) in &slots {
        if let Some((above, below)) = graph.insert_fact(a, b) {
            report.facts_added += 1;
            for x in above.ones() {
                for y in below.ones() {
                    graph.edges.remove_edge(x, y);
                }
            }
        }
    }
    let doomed: Vec<usize> = graph
        .edges
        .active_slots()
        .filter(|&s| graph.superiors(s) >= k)
        .collect();
    for s in doomed {
        graph.edges.remove_vertex(s);
        report.removed_vertices.push(graph.id(s));
    }
    report.edges_removed = before - graph.edge_count();
    debug_assert!(graph.is_acyclic());
    Ok(report)
}
