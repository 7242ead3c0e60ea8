//! One interactive query from candidate search to final ranking, plus a
//! simulated user for automated runs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{estimate_preference, final_topk, Estimate, EstimatorConfig, RankedObject};
use crate::girtree::{gi_super_search, Candidate, GirTree};
use crate::interaction::{
    build_graph, filter_candidates, generate_constraints, should_terminate, FilterReport,
    NoSuperiorGraph, RoundState, Strategy, TerminationConfig, TerminationReason,
};
use crate::model::{Constraint, GeoObject, PreferenceVector, Query};
use crate::num::{total_cmp, Scalar};
use crate::oracle::brute_topk_prefer;
use crate::scoring::f_prefer;
use crate::signature::splitmix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    CandidateSearch,
    Interaction,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SessionConfig<T: Scalar> {
    pub strategy: Strategy,
    pub seed: u64,
    pub termination: TerminationConfig,
    pub estimator: EstimatorConfig<T>,
}

impl<T: Scalar> Default for SessionConfig<T> {
    fn default() -> Self {
        Self {
            strategy: Strategy::DensestGraph,
            seed: 0,
            termination: TerminationConfig::default(),
            estimator: EstimatorConfig::default(),
        }
    }
}

/// What the caller sees after starting a session or giving feedback.
#[derive(Debug, Clone, PartialEq)]
pub enum Step<T: Scalar> {
    Show { round: usize, shown: Vec<u64> },
    Done { results: Vec<RankedObject<T>> },
}

#[derive(Debug, Clone)]
pub struct Session<T: Scalar> {
    query: Query<T>,
    config: SessionConfig<T>,
    phase: Phase,
    candidates: Vec<Candidate<T>>,
    graph: NoSuperiorGraph,
    rounds: Vec<RoundState>,
    constraints: Vec<Constraint<T>>,
    filter_reports: Vec<FilterReport>,
    results: Option<Vec<RankedObject<T>>>,
    estimate: Option<Estimate<T>>,
    termination: Vec<TerminationReason>,
    round_ms: Vec<f64>,
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

impl<T: Scalar> Session<T> {
    /// Finds the candidates, builds the graph and picks the first shown
    /// set, or finishes immediately when nothing is left to ask.
    pub fn start(tree: &GirTree<T>, query: Query<T>, config: SessionConfig<T>) -> Result<Self> {
        let started = Instant::now();
        query.validate()?;
        config.estimator.validate()?;
        let candidates = gi_super_search(tree, &query);
        if candidates.is_empty() {
            return Err(Error::NoCandidates);
        }
        let graph = build_graph(&candidates)?;
        let mut s = Self {
            query,
            config,
            phase: Phase::CandidateSearch,
            candidates,
            graph,
            rounds: Vec::new(),
            constraints: Vec::new(),
            filter_reports: Vec::new(),
            results: None,
            estimate: None,
            termination: Vec::new(),
            round_ms: Vec::new(),
        };
        s.phase = Phase::Interaction;
        s.advance(tree, false)?;
        s.round_ms.push(elapsed_ms(started));
        Ok(s)
    }

    /// Records the user's favourite among the last shown set.
    pub fn submit_feedback(&mut self, tree: &GirTree<T>, chosen: u64) -> Result<Step<T>> {
        let started = Instant::now();
        if self.phase != Phase::Interaction {
            return Err(Error::WrongPhase(self.phase));
        }
        let round = self.rounds.last().expect("interaction has a round");
        if !round.shown.contains(&chosen) {
            return Err(Error::NotShown(chosen));
        }
        let round_no = round.round_no;
        let new = generate_constraints(&self.graph, tree, &self.query, &round.shown, chosen, round_no)?;
        let facts: Vec<(u64, u64)> = new.iter().map(|c| (c.chosen, c.rejected)).collect();
        let report = filter_candidates(&mut self.graph, &facts, self.query.k)?;
        debug_assert!(self.graph.check_duality().is_ok());
        self.filter_reports.push(report);
        self.constraints.extend(new);
        self.rounds.last_mut().expect("checked above").chosen = Some(chosen);
        self.advance(tree, false)?;
        self.round_ms.push(elapsed_ms(started));
        Ok(self.step())
    }

    /// Ends the interaction early. Idempotent once terminated.
    pub fn stop(&mut self, tree: &GirTree<T>) -> Result<Vec<RankedObject<T>>> {
        if self.phase == Phase::Interaction {
            let started = Instant::now();
            self.advance(tree, true)?;
            self.round_ms.push(elapsed_ms(started));
        }
        Ok(self.results.clone().expect("terminated sessions have results"))
    }

    fn advance(&mut self, tree: &GirTree<T>, user_stop: bool) -> Result<()> {
        let done = self.rounds.iter().filter(|r| r.chosen.is_some()).count();
        let reasons = should_terminate(
            &self.graph,
            self.query.k,
            done,
            &self.config.termination,
            user_stop,
        );
        if reasons.is_empty() {
            let round_no = done + 1;
            let seed = splitmix64(self.config.seed ^ splitmix64(round_no as u64));
            let shown = self.config.strategy.select(&self.graph, self.query.theta, seed);
            self.rounds.push(RoundState {
                round_no,
                shown,
                chosen: None,
            });
            return Ok(());
        }
        if self.rounds.last().is_some_and(|r| r.chosen.is_none()) {
            self.rounds.pop();
        }
        let estimate = estimate_preference(&self.constraints, self.query.dim_words() + 1, &self.config.estimator)?;
        let survivors: Vec<&GeoObject<T>> = self
            .graph
            .vertex_ids()
            .into_iter()
            .map(|id| tree.object_by_id(id).ok_or(Error::UnknownObject(id)))
            .collect::<Result<_>>()?;
        let results = final_topk(&survivors, &self.query, &estimate.p, self.query.k, tree.frame());
        self.results = Some(results);
        self.estimate = Some(estimate);
        self.termination = reasons;
        self.phase = Phase::Terminated;
        Ok(())
    }

    /// The pending shown set, or the results once terminated.
    pub fn step(&self) -> Step<T> {
        match (&self.results, self.rounds.last()) {
            (Some(results), _) => Step::Done {
                results: results.clone(),
            },
            (None, Some(r)) => Step::Show {
                round: r.round_no,
                shown: r.shown.clone(),
            },
            (None, None) => unreachable!("a live session always has a round"),
        }
    }

    pub fn query(&self) -> &Query<T> {
        &self.query
    }

    pub fn config(&self) -> &SessionConfig<T> {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn candidates(&self) -> &[Candidate<T>] {
        &self.candidates
    }

    pub fn candidate(&self, id: u64) -> Option<&Candidate<T>> {
        self.candidates
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| &self.candidates[i])
    }

    pub fn graph(&self) -> &NoSuperiorGraph {
        &self.graph
    }

    pub fn rounds(&self) -> &[RoundState] {
        &self.rounds
    }

    /// Rounds in which the user picked a favourite.
    pub fn rounds_used(&self) -> usize {
        self.rounds.iter().filter(|r| r.chosen.is_some()).count()
    }

    pub fn current_round(&self) -> Option<&RoundState> {
        self.rounds.last().filter(|r| r.chosen.is_none())
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn filter_reports(&self) -> &[FilterReport] {
        &self.filter_reports
    }

    pub fn results(&self) -> Option<&[RankedObject<T>]> {
        self.results.as_deref()
    }

    pub fn estimate(&self) -> Option<&Estimate<T>> {
        self.estimate.as_ref()
    }

    pub fn termination(&self) -> &[TerminationReason] {
        &self.termination
    }

    /// Wall-clock milliseconds spent producing each response.
    pub fn round_ms(&self) -> &[f64] {
        &self.round_ms
    }
}

/// A user with a fixed hidden preference who always picks the shown
/// object with the highest `f_prefer`, smallest id on ties.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedUser<T: Scalar> {
    pub p_star: PreferenceVector<T>,
}

impl<T: Scalar> SimulatedUser<T> {
    pub fn new(p_star: PreferenceVector<T>) -> Self {
        Self { p_star }
    }

    pub fn pick(&self, tree: &GirTree<T>, q: &Query<T>, shown: &[u64]) -> Result<u64> {
        let mut best: Option<(T, u64)> = None;
        for &id in shown {
            let o = tree.object_by_id(id).ok_or(Error::UnknownObject(id))?;
            let s = f_prefer(q, o, &self.p_star, tree.frame());
            let better = match best {
                None => true,
                Some((b, bid)) => total_cmp(s, b).then(bid.cmp(&id)).is_gt(),
            };
            if better {
                best = Some((s, id));
            }
        }
        best.map(|(_, id)| id).ok_or(Error::NoCandidates)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub rounds: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub round_ms: Vec<f64>,
    pub results: Vec<u64>,
    pub truth: Vec<u64>,
    pub termination: Vec<TerminationReason>,
}

/// `(precision, recall, f1)` of `retrieved` against `relevant`.
pub fn retrieval_metrics(retrieved: &[u64], relevant: &[u64]) -> (f64, f64, f64) {
    let hits = retrieved.iter().filter(|id| relevant.contains(id)).count() as f64;
    let precision = if retrieved.is_empty() { 0.0 } else { hits / retrieved.len() as f64 };
    let recall = if relevant.is_empty() { 0.0 } else { hits / relevant.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Drives a full session with a simulated user and scores the result
/// against the true preference top-k.
pub fn simulate<T: Scalar>(
    tree: &GirTree<T>,
    q: &Query<T>,
    p_star: &PreferenceVector<T>,
    config: SessionConfig<T>,
) -> Result<SessionReport> {
    let user = SimulatedUser::new(p_star.clone());
    let mut session = Session::start(tree, q.clone(), config)?;
    let mut step = session.step();
    while let Step::Show { shown, .. } = step {
        let chosen = user.pick(tree, q, &shown)?;
        step = session.submit_feedback(tree, chosen)?;
    }
    let Step::Done { results } = step else { unreachable!() };
    let results: Vec<u64> = results.iter().map(|r| r.id).collect();
    let truth = brute_topk_prefer(tree.objects(), q, p_star, q.k, tree.frame());
    let (precision, recall, f1) = retrieval_metrics(&results, &truth);
    Ok(SessionReport {
        rounds: session.rounds_used(),
        precision,
        recall,
        f1,
        round_ms: session.round_ms().to_vec(),
        results,
        truth,
        termination: session.termination().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Location, WordSet};
    use crate::signature::SignatureConfig;

    fn tree() -> GirTree<f64> {
        let objs: Vec<_> = (0..40u64)
            .map(|i| {
                let words: Vec<u32> = (0..4).filter(|w| (i >> w) & 1 == 1).collect();
                GeoObject::new(
                    i,
                    Location::new((i % 7) as f64 * 0.1, (i / 7) as f64 * 0.1),
                    WordSet::from_iter(words.into_iter().chain([9])),
                )
            })
            .collect();
        GirTree::build(objs, 4, SignatureConfig::default()).unwrap()
    }

    fn query() -> Query<f64> {
        Query::new(Location::new(0.3, 0.3), WordSet::from_iter([0, 1, 2, 3])).with_k(3).with_theta(4)
    }

    #[test]
    fn k_covering_everything_finishes_immediately() {
        let t = tree();
        let q = query().with_k(40);
        let s = Session::start(&t, q, SessionConfig::default()).unwrap();
        assert_eq!(s.phase(), Phase::Terminated);
        assert_eq!(s.results().unwrap().len(), 40);
        assert!(s.termination().contains(&TerminationReason::CandidatesExhausted));
    }

    #[test]
    fn phases_and_errors() {
        let t = tree();
        let mut s = Session::start(&t, query(), SessionConfig::default()).unwrap();
        assert_eq!(s.phase(), Phase::Interaction);
        let shown = s.current_round().unwrap().shown.clone();
        assert!(shown.len() <= 4);
        let outsider = (0..40).find(|id| !shown.contains(id)).unwrap();
        assert!(matches!(s.submit_feedback(&t, outsider), Err(Error::NotShown(_))));
        let res = s.stop(&t).unwrap();
        assert_eq!(s.phase(), Phase::Terminated);
        assert_eq!(s.stop(&t).unwrap(), res);
        assert!(matches!(s.submit_feedback(&t, shown[0]), Err(Error::WrongPhase(Phase::Terminated))));
    }

    #[test]
    fn simulation_is_deterministic() {
        let t = tree();
        let p = PreferenceVector::new(0.3, vec![1.0, 0.2, 0.7, 0.1]).unwrap();
        for strategy in [Strategy::Random, Strategy::DensestGraph] {
            let cfg = SessionConfig {
                strategy,
                seed: 5,
                ..Default::default()
            };
            let a = simulate(&t, &query(), &p, cfg.clone()).unwrap();
            let b = simulate(&t, &query(), &p, cfg).unwrap();
            assert_eq!((a.rounds, &a.results, a.precision), (b.rounds, &b.results, b.precision));
            assert!(a.rounds <= 10);
        }
    }

    #[test]
    fn metrics() {
        assert_eq!(retrieval_metrics(&[1, 2, 3, 4], &[1, 2, 5, 6]), (0.5, 0.5, 0.5));
        assert_eq!(retrieval_metrics(&[], &[1]), (0.0, 0.0, 0.0));
    }
}
