use std::cmp::Reverse;
use std::collections::BinaryHeap;

use fixedbitset::FixedBitSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{density_fraction, fraction_gt, NoSuperiorGraph, UndirectedGraph};

/// Uniform sample of `min(theta, |V|)` surviving vertices, sorted by id.
pub fn select_random(graph: &NoSuperiorGraph, theta: usize, seed: u64) -> Vec<u64> {
    let slots: Vec<usize> = graph.edges().active_slots().collect();
    if slots.len() <= theta {
        return slots.into_iter().map(|s| graph.id(s)).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<u64> = rand::seq::index::sample(&mut rng, slots.len(), theta)
        .into_iter()
        .map(|i| graph.id(slots[i]))
        .collect();
    picked.sort_unstable();
    picked
}

fn expected_for_slots(graph: &NoSuperiorGraph, set: &[usize]) -> f64 {
    let mut mask = FixedBitSet::with_capacity(graph.edges().slots());
    set.iter().for_each(|&s| mask.insert(s));
    let mut undominated = 0usize;
    let mut total = 0usize;
    for &o in set {
        if graph.order_col(o).intersection_count(&mask) > 0 {
            continue;
        }
        undominated += 1;
        total += graph.edges().neighbours(o).intersection_count(&mask);
    }
    if undominated == 0 {
        0.0
    } else {
        total as f64 / undominated as f64
    }
}

/// Expected number of new constraints if the user picks uniformly among
/// the shown objects that no other shown object is known to beat.
/// Ids outside the graph are ignored.
pub fn expected_constraints(graph: &NoSuperiorGraph, shown: &[u64]) -> f64 {
    let slots: Vec<usize> = shown
        .iter()
        .filter_map(|&id| graph.slot(id))
        .filter(|&s| graph.edges().is_active(s))
        .collect();
    expected_for_slots(graph, &slots)
}

/// Result of greedy peeling.
#[derive(Debug, Clone, PartialEq)]
pub struct Peeled {
    /// Slots of the densest intermediate subgraph, ascending.
    pub slots: Vec<usize>,
    pub edges: usize,
    pub density: f64,
}

/// Greedy peeling: removes a minimum-degree vertex at a time and keeps the
/// densest intermediate subgraph with at least two vertices. Among equally
/// dense subgraphs the larger one wins.
pub fn peel_densest(graph: &UndirectedGraph) -> Peeled {
    let n = graph.slots();
    let alive_init: Vec<usize> = graph.active_slots().collect();
    let mut degree = vec![0usize; n];
    let mut max_deg = 0;
    for &v in &alive_init {
        degree[v] = graph.degree(v);
        max_deg = max_deg.max(degree[v]);
    }
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); max_deg + 1];
    for &v in alive_init.iter().rev() {
        buckets[degree[v]].push(v);
    }
    let mut alive = graph.active().clone();
    let mut remaining = alive_init.len();
    let mut edges = graph.edge_count();
    let mut order = Vec::with_capacity(remaining);
    let mut best = (0usize, (0u128, 1u128), edges);
    let mut cur = 0;
    while remaining >= 2 {
        let d = density_fraction(remaining, edges);
        if order.is_empty() || fraction_gt(d, best.1) {
            best = (order.len(), d, edges);
        }
        let v = loop {
            while buckets[cur].is_empty() {
                cur += 1;
            }
            let v = buckets[cur].pop().expect("non-empty bucket");
            if alive.contains(v) && degree[v] == cur {
                break v;
            }
        };
        alive.remove(v);
        remaining -= 1;
        edges -= degree[v];
        order.push(v);
        for u in graph.neighbours(v).ones() {
            if alive.contains(u) {
                degree[u] -= 1;
                buckets[degree[u]].push(u);
                cur = cur.min(degree[u]);
            }
        }
    }
    let removed: FixedBitSet = order[..best.0].iter().copied().collect();
    let slots: Vec<usize> = alive_init.into_iter().filter(|s| !removed.contains(*s)).collect();
    Peeled {
        density: best.1 .0 as f64 / best.1 .1 as f64,
        edges: best.2,
        slots,
    }
}

/// Removes the members that beat the most other members until `set`
/// has `target` members. Ties go to the smaller id.
fn shrink_to(graph: &NoSuperiorGraph, set: &mut Vec<usize>, target: usize) {
    let mut mask = FixedBitSet::with_capacity(graph.edges().slots());
    set.iter().for_each(|&s| mask.insert(s));
    let mut beats = vec![0usize; graph.edges().slots()];
    let mut heap = BinaryHeap::new();
    for &s in set.iter() {
        beats[s] = graph.order_row(s).intersection_count(&mask);
        heap.push((beats[s], Reverse(s)));
    }
    let mut size = set.len();
    while size > target {
        let (b, Reverse(s)) = heap.pop().expect("heap holds every member");
        if !mask.contains(s) || beats[s] != b {
            continue;
        }
        mask.remove(s);
        size -= 1;
        for y in graph.order_col(s).ones() {
            if mask.contains(y) {
                beats[y] -= 1;
                heap.push((beats[y], Reverse(y)));
            }
        }
    }
    set.retain(|s| mask.contains(*s));
}

/// The member beating the most other members, smallest id on ties.
fn top_dominator(graph: &NoSuperiorGraph, set: &[usize]) -> Option<usize> {
    let mut mask = FixedBitSet::with_capacity(graph.edges().slots());
    set.iter().for_each(|&s| mask.insert(s));
    set.iter()
        .map(|&s| (graph.order_row(s).intersection_count(&mask), Reverse(s)))
        .max()
        .map(|(_, Reverse(s))| s)
}

/// Unvisited outsider with the most edges into `set`, smallest id on ties.
fn best_addition(graph: &NoSuperiorGraph, set: &[usize], visited: &FixedBitSet) -> Option<usize> {
    let g = graph.edges();
    let mut into = vec![0usize; g.slots()];
    for &s in set {
        for u in g.neighbours(s).ones() {
            into[u] += 1;
        }
    }
    g.active_slots()
        .filter(|&u| !visited.contains(u) && !set.contains(&u))
        .map(|u| (into[u], Reverse(u)))
        .max()
        .map(|(_, Reverse(u))| u)
}

/// Densest-subgraph selection: peel, then adjust the size towards `theta`
/// while the expected number of constraints strictly improves. Falls back
/// to [`select_random`] when the graph has no edge. Result sorted by id.
pub fn select_densest(graph: &NoSuperiorGraph, theta: usize, seed: u64) -> Vec<u64> {
    if graph.vertex_count() < 2 || graph.edge_count() == 0 {
        return select_random(graph, theta, seed);
    }
    let mut set = peel_densest(graph.edges()).slots;
    if set.len() > theta {
        shrink_to(graph, &mut set, theta);
    } else {
        let mut visited = FixedBitSet::with_capacity(graph.edges().slots());
        set.iter().for_each(|&s| visited.insert(s));
        let mut current = expected_for_slots(graph, &set);
        let limit = graph.vertex_count() + theta;
        for _ in 0..limit {
            let trial = if set.len() == theta {
                let Some(x) = top_dominator(graph, &set) else { break };
                let t: Vec<usize> = set.iter().copied().filter(|&s| s != x).collect();
                t
            } else {
                let Some(u) = best_addition(graph, &set, &visited) else { break };
                visited.insert(u);
                let mut t = set.clone();
                let at = t.partition_point(|&s| s < u);
                t.insert(at, u);
                t
            };
            let e = expected_for_slots(graph, &trial);
            if e > current {
                current = e;
                set = trial;
            } else {
                break;
            }
        }
    }
    set.into_iter().map(|s| graph.id(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::graph::build_graph;
    use crate::interaction::tests::cand;

    #[test]
    fn random_returns_everything_when_small() {
        let cs: Vec<_> = (0..5).map(|i| cand(i, 0.1 * i as f64, &[(4 - i) as usize])).collect();
        let g = build_graph(&cs).unwrap();
        assert_eq!(select_random(&g, 8, 1), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn random_is_seeded() {
        let cs: Vec<_> = (0..40).map(|i| cand(i, 0.01 * i as f64, &[(i % 4) as usize])).collect();
        let g = build_graph(&cs).unwrap();
        let a = select_random(&g, 8, 42);
        assert_eq!(a, select_random(&g, 8, 42));
        assert_eq!(a.len(), 8);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn expected_constraints_examples() {
        let cs = vec![cand(1, 0.9, &[0]), cand(2, 0.5, &[1])];
        let g = build_graph(&cs).unwrap();
        assert_eq!(expected_constraints(&g, &[1, 2]), 1.0);
        let chain = vec![cand(1, 0.9, &[0]), cand(2, 0.5, &[0]), cand(3, 0.1, &[0])];
        let g = build_graph(&chain).unwrap();
        assert_eq!(expected_constraints(&g, &[1, 2, 3]), 0.0);
    }

    #[test]
    fn complete_graph_on_theta_vertices() {
        let cs: Vec<_> = (0..4).map(|i| cand(i, 0.1 * i as f64, &[(3 - i) as usize])).collect();
        let g = build_graph(&cs).unwrap();
        let shown = select_densest(&g, 4, 0);
        assert_eq!(shown, vec![0, 1, 2, 3]);
        assert_eq!(expected_constraints(&g, &shown), 3.0);
    }

    #[test]
    fn peeling_finds_clique() {
        let mut g = UndirectedGraph::new((0..10).collect()).unwrap();
        for a in 2..6 {
            for b in a + 1..6 {
                g.add_edge(a, b);
            }
        }
        g.add_edge(0, 9);
        let p = peel_densest(&g);
        assert_eq!(p.slots, vec![2, 3, 4, 5]);
        assert_eq!(p.density, 1.0);
    }
}
