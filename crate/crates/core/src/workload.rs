//! Random query workloads and batch evaluation of the interactive loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::girtree::GirTree;
use crate::interaction::{Strategy, TerminationConfig};
use crate::model::{Location, PreferenceVector, Query, WordSet};
use crate::num::Scalar;
use crate::session::{simulate, SessionConfig, SessionReport};
use crate::signature::splitmix64;

/// A query whose words follow the corpus' own word frequencies: `t`
/// distinct words drawn by picking random word occurrences. The location
/// is uniform in the dataset's bounding box.
pub fn random_query<T: Scalar, R: Rng>(tree: &GirTree<T>, t: usize, rng: &mut R) -> Query<T> {
    let bbox = tree.node(tree.root()).mbr;
    let lon = rng.random_range(bbox.min_lon.as_f64()..=bbox.max_lon.as_f64());
    let lat = rng.random_range(bbox.min_lat.as_f64()..=bbox.max_lat.as_f64());
    let objects = tree.objects();
    let mut words = std::collections::BTreeSet::new();
    let mut attempts = 0;
    while words.len() < t && attempts < 1000 * t {
        let o = &objects[rng.random_range(0..objects.len())];
        if !o.words.is_empty() {
            let w = o.words.as_slice()[rng.random_range(0..o.words.len())];
            words.insert(w);
        }
        attempts += 1;
    }
    Query::new(Location::new(T::lit(lon), T::lit(lat)), WordSet::from_iter(words))
}

/// Every weight uniform in `[0, 1]`.
pub fn random_preference<T: Scalar, R: Rng>(t: usize, rng: &mut R) -> PreferenceVector<T> {
    let p0 = T::lit(rng.random::<f64>());
    let pw = (0..t).map(|_| T::lit(rng.random::<f64>())).collect();
    PreferenceVector { p0, pw }
}

/// [`random_preference`] drawn from its own seed.
pub fn seeded_preference<T: Scalar>(t: usize, seed: u64) -> PreferenceVector<T> {
    random_preference(t, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub sessions: usize,
    pub k: usize,
    pub theta: usize,
    pub t: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub max_rounds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            sessions: 100,
            k: Query::<f64>::DEFAULT_K,
            theta: Query::<f64>::DEFAULT_THETA,
            t: 100,
            strategy: Strategy::DensestGraph,
            seed: 0,
            max_rounds: TerminationConfig::default().max_rounds,
        }
    }
}

/// Query, hidden preference and session seed of workload item `i`.
/// Depends only on `(seed, i)`, not on the strategy.
pub fn workload_item<T: Scalar>(
    tree: &GirTree<T>,
    cfg: &EvalConfig,
    i: usize,
) -> (Query<T>, PreferenceVector<T>, u64) {
    let item_seed = splitmix64(cfg.seed ^ splitmix64(i as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(item_seed);
    let q = random_query(tree, cfg.t, &mut rng)
        .with_k(cfg.k)
        .with_theta(cfg.theta);
    let t = q.dim_words();
    let p = random_preference(t, &mut rng);
    (q, p, rng.random())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub strategy: Strategy,
    pub k: usize,
    pub theta: usize,
    pub t: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_ms_per_round: f64,
    pub mean_rounds: f64,
    pub reports: Vec<SessionReport>,
}

pub const EVAL_CSV_HEADER: &str = "strategy,k,theta,t,precision,recall,f1,mean_ms_per_round,mean_rounds";

impl EvalSummary {
    /// One CSV row. Timing is wall-clock and therefore only printed when
    /// `with_timing` is set; otherwise the cell reads `NA`.
    pub fn csv_row(&self, with_timing: bool) -> String {
        let ms = if with_timing {
            format!("{:.3}", self.mean_ms_per_round)
        } else {
            "NA".to_string()
        };
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{ms},{:.3}",
            self.strategy.name(),
            self.k,
            self.theta,
            self.t,
            self.precision,
            self.recall,
            self.f1,
            self.mean_rounds
        )
    }
}

/// Runs `cfg.sessions` simulated sessions in parallel; reports keep the
/// session order.
pub fn run_eval<T: Scalar>(tree: &GirTree<T>, cfg: &EvalConfig) -> Result<EvalSummary> {
    if cfg.sessions == 0 {
        return Err(Error::InvalidConfig("sessions must be at least 1".into()));
    }
    let reports: Vec<SessionReport> = (0..cfg.sessions)
        .into_par_iter()
        .map(|i| {
            let (q, p, seed) = workload_item(tree, cfg, i);
            let session_cfg = SessionConfig {
                strategy: cfg.strategy,
                seed,
                termination: TerminationConfig {
                    max_rounds: cfg.max_rounds,
                },
                ..Default::default()
            };
            simulate(tree, &q, &p, session_cfg)
        })
        .collect::<Result<_>>()?;
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&SessionReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let all_ms: Vec<f64> = reports.iter().flat_map(|r| r.round_ms.iter().copied()).collect();
    Ok(EvalSummary {
        strategy: cfg.strategy,
        k: cfg.k,
        theta: cfg.theta,
        t: cfg.t,
        precision: mean(&|r| r.precision),
        recall: mean(&|r| r.recall),
        f1: mean(&|r| r.f1),
        mean_ms_per_round: all_ms.iter().sum::<f64>() / all_ms.len().max(1) as f64,
        mean_rounds: mean(&|r| r.rounds as f64),
        reports,
    })
}
