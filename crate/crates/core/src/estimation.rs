//! Preference estimation from feedback constraints and the final ranking.
//!
//! The estimate minimises `|p|^2 + c * sum max(0, margin - delta . p)` over
//! `p >= 0`. The solver runs exact coordinate ascent on the dual
//!
//! ```text
//! max  margin * sum(a) - |[A^T a]+|^2 / 4   subject to 0 <= a <= c
//! ```
//!
//! and recovers `p = [A^T a]+ / 2`. When the result still leaves margins
//! unmet, the penalty is raised tenfold (up to `max_escalations` times);
//! a feasible system is then solved with the hard margin, while an
//! inconsistent one keeps the soft solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Constraint, Frame, GeoObject, PreferenceVector, Query};
use crate::num::{total_cmp, Scalar};
use crate::scoring::f_prefer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EstimatorConfig<T: Scalar> {
    pub margin: T,
    pub soft_penalty: T,
    /// Maximum number of sweeps over the constraints per penalty level.
    pub max_iters: usize,
    pub tol: T,
    pub max_escalations: usize,
}

impl<T: Scalar> Default for EstimatorConfig<T> {
    fn default() -> Self {
        Self {
            margin: T::one(),
            soft_penalty: T::lit(10.0),
            max_iters: 5000,
            tol: T::lit(1e-8),
            max_escalations: 6,
        }
    }
}

impl<T: Scalar> EstimatorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.margin > T::zero() && self.soft_penalty > T::zero() && self.tol > T::zero();
        if !ok || self.max_iters == 0 {
            return Err(Error::InvalidConfig("estimator parameters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Estimate<T: Scalar> {
    pub p: PreferenceVector<T>,
    /// Soft-margin objective at `p` under `penalty`.
    pub objective: T,
    /// Penalty of the last solve.
    pub penalty: T,
    /// `max(0, margin - delta . p)` over all constraints.
    pub max_slack: T,
    pub sweeps: usize,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn positive_part<T: Scalar>(u: &[T]) -> Vec<T> {
    u.iter().map(|&x| x.max(T::zero())).collect()
}

pub fn soft_margin_objective<T: Scalar>(deltas: &[&[T]], p: &[T], margin: T, penalty: T) -> T {
    let hinge = deltas
        .iter()
        .fold(T::zero(), |acc, d| acc + (margin - dot(d, p)).max(T::zero()));
    dot(p, p) + penalty * hinge
}

fn dual_objective<T: Scalar>(alpha: &[T], u: &[T], margin: T) -> T {
    let plus = positive_part(u);
    margin * alpha.iter().copied().sum::<T>() - dot(&plus, &plus) / T::lit(4.0)
}

/// Exact maximiser over `t in [lo, hi]` of the concave, piecewise
/// quadratic `margin * t - |[u + t d]+|^2 / 4`.
fn line_max<T: Scalar>(d: &[T], u: &[T], margin: T, lo: T, hi: T) -> T {
    let half = T::lit(0.5);
    let slope = |t: T| {
        margin
            - half
                * d.iter()
                    .zip(u)
                    .fold(T::zero(), |acc, (&a, &x)| acc + a * (x + t * a).max(T::zero()))
    };
    if slope(hi) >= T::zero() {
        return hi;
    }
    if slope(lo) <= T::zero() {
        return lo;
    }
    let mut points: Vec<T> = d
        .iter()
        .zip(u)
        .filter(|(a, _)| **a != T::zero())
        .map(|(&a, &x)| -x / a)
        .filter(|&t| t > lo && t < hi)
        .collect();
    points.push(lo);
    points.push(hi);
    points.sort_by(|a, b| total_cmp(*a, *b));
    points.dedup();
    // slope(points[a]) > 0 >= slope(points[b])
    let (mut a, mut b) = (0, points.len() - 1);
    while b - a > 1 {
        let mid = (a + b) / 2;
        if slope(points[mid]) > T::zero() {
            a = mid;
        } else {
            b = mid;
        }
    }
    let (t0, t1) = (points[a], points[b]);
    let probe = (t0 + t1) * half;
    let (mut curv, mut rest) = (T::zero(), T::zero());
    for (&dj, &uj) in d.iter().zip(u) {
        if uj + probe * dj > T::zero() {
            curv = curv + dj * dj;
            rest = rest + dj * uj;
        }
    }
    if curv <= T::zero() {
        return t1;
    }
    ((margin - half * rest) / (half * curv)).max(t0).min(t1)
}

/// Exact coordinate ascent sweeps until the duality gap closes to
/// `tol` relative to the primal objective. Returns the sweep count.
fn coordinate_ascent<T: Scalar>(
    deltas: &[&[T]],
    alpha: &mut [T],
    u: &mut [T],
    penalty: T,
    cfg: &EstimatorConfig<T>,
) -> usize {
    let mut prev = dual_objective(alpha, u, cfg.margin);
    for sweep in 1..=cfg.max_iters {
        for (i, d) in deltas.iter().enumerate() {
            if d.iter().all(|&x| x == T::zero()) {
                continue;
            }
            let step = line_max(d, u, cfg.margin, -alpha[i], penalty - alpha[i]);
            if step != T::zero() {
                alpha[i] = alpha[i] + step;
                u.iter_mut().zip(d.iter()).for_each(|(x, &a)| *x = *x + step * a);
            }
        }
        let dual = dual_objective(alpha, u, cfg.margin);
        debug_assert!(dual >= prev - dual.abs().max(T::one()) * T::lit(1e-9), "dual objective decreased");
        prev = dual;
        let p: Vec<T> = positive_part(u).into_iter().map(|x| x * T::lit(0.5)).collect();
        let primal = soft_margin_objective(deltas, &p, cfg.margin, penalty);
        if primal - dual <= cfg.tol * primal.abs().max(T::one()) {
            return sweep;
        }
    }
    cfg.max_iters
}

/// Minimum-norm preference vector separating every constraint by the
/// margin. No constraints gives the uniform vector.
pub fn estimate_preference<T: Scalar>(
    constraints: &[Constraint<T>],
    dim: usize,
    cfg: &EstimatorConfig<T>,
) -> Result<Estimate<T>> {
    cfg.validate()?;
    if dim == 0 {
        return Err(Error::InvalidConfig("preference dimension must be at least 1".into()));
    }
    if let Some(c) = constraints.iter().find(|c| c.delta.len() != dim) {
        return Err(Error::InvalidConfig(format!(
            "constraint {} over {} has {} coordinates, expected {dim}",
            c.chosen,
            c.rejected,
            c.delta.len()
        )));
    }
    if constraints.is_empty() {
        let p = PreferenceVector::uniform(dim - 1);
        return Ok(Estimate {
            objective: T::from_count(dim),
            p,
            penalty: cfg.soft_penalty,
            max_slack: T::zero(),
            sweeps: 0,
        });
    }
    let deltas: Vec<&[T]> = constraints.iter().map(|c| c.delta.as_slice()).collect();
    let mut alpha = vec![T::zero(); deltas.len()];
    let mut u = vec![T::zero(); dim];
    let mut penalty = cfg.soft_penalty;
    let mut sweeps = 0;
    let slack_tol = cfg.margin * T::lit(1e-6);
    let mut escalations = 0;
    loop {
        sweeps += coordinate_ascent(&deltas, &mut alpha, &mut u, penalty, cfg);
        let p: Vec<T> = positive_part(&u).into_iter().map(|x| x * T::lit(0.5)).collect();
        let max_slack = deltas
            .iter()
            .fold(T::zero(), |acc, d| acc.max(cfg.margin - dot(d, &p)));
        if max_slack <= slack_tol || escalations == cfg.max_escalations {
            return Ok(Estimate {
                objective: soft_margin_objective(&deltas, &p, cfg.margin, penalty),
                p: PreferenceVector::from_dense(&p),
                penalty,
                max_slack,
                sweeps,
            });
        }
        penalty = penalty * T::lit(10.0);
        escalations += 1;
    }
}

/// One ranked result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RankedObject<T: Scalar> {
    pub id: u64,
    pub score: T,
}

/// The best `min(k, |candidates|)` candidates under `f_prefer(p)`, score
/// descending, ties by ascending id.
pub fn final_topk<T: Scalar>(
    candidates: &[&GeoObject<T>],
    q: &Query<T>,
    p: &PreferenceVector<T>,
    k: usize,
    frame: &Frame<T>,
) -> Vec<RankedObject<T>> {
    let mut ranked: Vec<RankedObject<T>> = candidates
        .iter()
        .map(|o| RankedObject {
            id: o.id,
            score: f_prefer(q, o, p, frame),
        })
        .collect();
    ranked.sort_by(|a, b| total_cmp(b.score, a.score).then(a.id.cmp(&b.id)));
    ranked.truncate(k);
    ranked
}
