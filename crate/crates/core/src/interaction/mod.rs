//! The interaction rounds: candidate graph, subset selection, feedback
//! constraints, filtering and termination.

mod feedback;
mod graph;
mod select;

pub use feedback::{
    generate_constraints, should_terminate, RoundState, TerminationConfig, TerminationReason,
};
pub use graph::{
    build_graph, density, density_fraction, filter_candidates, FilterReport, NoSuperiorGraph,
    UndirectedGraph,
};
pub use select::{expected_constraints, peel_densest, select_densest, select_random, Peeled};

use serde::{Deserialize, Serialize};

/// How each round's shown set is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    #[serde(rename = "densest")]
    DensestGraph,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::DensestGraph => "densest",
        }
    }

    pub fn select(self, graph: &NoSuperiorGraph, theta: usize, seed: u64) -> Vec<u64> {
        match self {
            Strategy::Random => select_random(graph, theta, seed),
            Strategy::DensestGraph => select_densest(graph, theta, seed),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Strategy::Random),
            "densest" | "densest-graph" => Ok(Strategy::DensestGraph),
            other => Err(format!("unknown strategy {other:?}, expected random or densest")),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use crate::girtree::Candidate;
    use crate::model::ScorePair;
    use crate::scoring::{ScoreProfile, WordMask};

    /// Candidate whose profile only varies in proximity and matched words
    /// (query of four words, constant union).
    pub(crate) fn cand(id: u64, prox: f64, words: &[usize]) -> Candidate<f64> {
        let mut m = WordMask::empty(4);
        words.iter().for_each(|&w| m.set(w));
        Candidate {
            index: id as usize,
            id,
            profile: ScoreProfile {
                pair: ScorePair::new(prox, words.len() as f64 / 4.0),
                matched: m,
                union: 4,
            },
        }
    }
}
