//! Brute-force reference implementations used by tests and the acceptance
//! suite.

use crate::error::{Error, Result};
use crate::interaction::{density_fraction, UndirectedGraph};
use crate::model::{Frame, GeoObject, PreferenceVector, Query};
use crate::num::{total_cmp, Scalar};
use crate::scoring::{dominates, f_prefer, ScoreProfile};

/// Ids of every object with fewer than `q.k` superiors, ascending.
pub fn brute_k_superiors<T: Scalar>(objects: &[GeoObject<T>], q: &Query<T>, frame: &Frame<T>) -> Vec<u64> {
    let profiles: Vec<ScoreProfile<T>> = objects.iter().map(|o| ScoreProfile::of(q, o, frame)).collect();
    let mut ids: Vec<u64> = profiles
        .iter()
        .zip(objects)
        .filter(|(p, _)| profiles.iter().filter(|other| dominates(other, p)).count() < q.k)
        .map(|(_, o)| o.id)
        .collect();
    ids.sort_unstable();
    ids
}

/// Top `k` ids by `f_prefer` descending, ties by ascending id.
pub fn brute_topk_prefer<T: Scalar>(
    objects: &[GeoObject<T>],
    q: &Query<T>,
    p: &PreferenceVector<T>,
    k: usize,
    frame: &Frame<T>,
) -> Vec<u64> {
    let mut scored: Vec<(T, u64)> = objects.iter().map(|o| (f_prefer(q, o, p, frame), o.id)).collect();
    scored.sort_by(|a, b| total_cmp(b.0, a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, id)| id).collect()
}

/// Largest vertex count accepted by [`brute_densest_subgraph`].
pub const BRUTE_DENSEST_CAP: usize = 20;

/// Exhaustive densest subgraph over active vertices (subsets of size >= 2).
/// Returns the slots and the density; larger sets win ties.
pub fn brute_densest_subgraph(graph: &UndirectedGraph) -> Result<(Vec<usize>, f64)> {
    let verts: Vec<usize> = graph.active_slots().collect();
    if verts.len() > BRUTE_DENSEST_CAP {
        return Err(Error::TooLarge {
            size: verts.len(),
            cap: BRUTE_DENSEST_CAP,
        });
    }
    let mut best: (Vec<usize>, (u128, u128)) = (Vec::new(), (0, 1));
    for mask in 1u32..(1 << verts.len()) {
        if mask.count_ones() < 2 {
            continue;
        }
        let set: Vec<usize> = (0..verts.len()).filter(|i| mask >> i & 1 == 1).map(|i| verts[i]).collect();
        let d = density_fraction(set.len(), graph.edges_within(&set));
        let (lhs, rhs) = (d.0 * best.1 .1, best.1 .0 * d.1);
        if lhs > rhs || (lhs == rhs && set.len() > best.0.len()) {
            best = (set, d);
        }
    }
    Ok((best.0, best.1 .0 as f64 / best.1 .1 as f64))
}

/// Soft-margin objective `|p|^2 + c * sum max(0, margin - delta . p)`.
pub fn soft_margin_objective(deltas: &[Vec<f64>], p: &[f64], margin: f64, penalty: f64) -> f64 {
    let norm: f64 = p.iter().map(|x| x * x).sum();
    let hinge: f64 = deltas
        .iter()
        .map(|d| (margin - d.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()).max(0.0))
        .sum();
    norm + penalty * hinge
}

/// Minimum of [`soft_margin_objective`] over the grid
/// `{0, step, 2 step, ..., upper}^dim`. Returns the point and its value.
pub fn grid_search_soft_margin(
    deltas: &[Vec<f64>],
    dim: usize,
    upper: f64,
    step: f64,
    margin: f64,
    penalty: f64,
) -> Result<(Vec<f64>, f64)> {
    if dim == 0 || dim > 4 {
        return Err(Error::TooLarge { size: dim, cap: 4 });
    }
    let ticks = (upper / step).round() as usize + 1;
    let mut idx = vec![0usize; dim];
    let mut p = vec![0.0; dim];
    let mut best = (p.clone(), f64::INFINITY);
    loop {
        for (x, &i) in p.iter_mut().zip(&idx) {
            *x = i as f64 * step;
        }
        let v = soft_margin_objective(deltas, &p, margin, penalty);
        if v < best.1 {
            best = (p.clone(), v);
        }
        let mut axis = 0;
        loop {
            if axis == dim {
                return Ok(best);
            }
            idx[axis] += 1;
            if idx[axis] < ticks {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Location, WordSet};

    #[test]
    fn k_superiors_on_chain() {
        let objs: Vec<GeoObject<f64>> = (0..5)
            .map(|i| GeoObject::new(i, Location::new(i as f64, 0.0), WordSet::from_iter([1])))
            .collect();
        let frame = Frame::new(1.0, 10.0);
        let q = Query::new(Location::new(0.0, 0.0), WordSet::from_iter([1])).with_k(2);
        assert_eq!(brute_k_superiors(&objs, &q, &frame), vec![0, 1]);
        let p = PreferenceVector::uniform(1);
        assert_eq!(brute_topk_prefer(&objs, &q, &p, 3, &frame), vec![0, 1, 2]);
    }

    #[test]
    fn densest_of_triangle_plus_tail() {
        let mut g = UndirectedGraph::new((0..5).collect()).unwrap();
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(0, 2);
        g.add_edge(2, 3);
        let (set, d) = brute_densest_subgraph(&g).unwrap();
        assert_eq!(d, 1.0);
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn grid_finds_analytic_optimum() {
        let (p, v) = grid_search_soft_margin(&[vec![1.0, 0.0]], 2, 2.0, 0.01, 1.0, 10.0).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9 && p[1] == 0.0);
        assert!((v - 1.0).abs() < 1e-9);
    }
}
