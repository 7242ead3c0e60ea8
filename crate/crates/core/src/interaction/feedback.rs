use serde::{Deserialize, Serialize};

use super::graph::NoSuperiorGraph;
use crate::error::{Error, Result};
use crate::girtree::GirTree;
use crate::model::{Constraint, Query};
use crate::num::Scalar;
use crate::scoring::feature_map;

/// One show/pick cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundState {
    pub round_no: usize,
    pub shown: Vec<u64>,
    pub chosen: Option<u64>,
}

/// One constraint `chosen ≻ o` for every shown `o` whose order against
/// `chosen` is not known yet.
pub fn generate_constraints<T: Scalar>(
    graph: &NoSuperiorGraph,
    tree: &GirTree<T>,
    q: &Query<T>,
    shown: &[u64],
    chosen: u64,
    round: usize,
) -> Result<Vec<Constraint<T>>> {
    if !shown.contains(&chosen) {
        return Err(Error::NotShown(chosen));
    }
    let slot = |id: u64| graph.slot(id).ok_or(Error::UnknownObject(id));
    let features = |id: u64| {
        tree.object_by_id(id)
            .map(|o| feature_map(q, o, tree.frame()))
            .ok_or(Error::UnknownObject(id))
    };
    let c = slot(chosen)?;
    let phi_c = features(chosen)?;
    let mut out = Vec::new();
    for &o in shown {
        if o == chosen {
            continue;
        }
        let s = slot(o)?;
        if graph.knows(s, c) {
            return Err(Error::InconsistentFeedback(format!(
                "object {o} is already known to be preferred over the chosen {chosen}"
            )));
        }
        if graph.knows(c, s) {
            continue;
        }
        let phi_o = features(o)?;
        out.push(Constraint {
            chosen,
            rejected: o,
            round,
            delta: phi_c.iter().zip(&phi_o).map(|(&a, &b)| a - b).collect(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminationConfig {
    pub max_rounds: usize,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        Self { max_rounds: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminationReason {
    CandidatesExhausted,
    FullyOrdered,
    MaxRounds,
    UserStop,
}

/// Every reason that currently holds; empty means keep going.
pub fn should_terminate(
    graph: &NoSuperiorGraph,
    k: usize,
    round_no: usize,
    cfg: &TerminationConfig,
    user_stop: bool,
) -> Vec<TerminationReason> {
    let mut reasons = Vec::new();
    if graph.vertex_count() <= k {
        reasons.push(TerminationReason::CandidatesExhausted);
    }
    if graph.edge_count() == 0 {
        reasons.push(TerminationReason::FullyOrdered);
    }
    if round_no >= cfg.max_rounds {
        reasons.push(TerminationReason::MaxRounds);
    }
    if user_stop {
        reasons.push(TerminationReason::UserStop);
    }
    reasons
}
