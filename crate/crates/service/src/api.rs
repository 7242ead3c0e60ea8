//! Request and response bodies.

use geoprefer_core::girtree::Candidate;
use geoprefer_core::{GirTree, PreferenceVector, RankedObject, Strategy};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub lat: f64,
    pub lon: f64,
    pub words: Vec<u32>,
    pub k: Option<usize>,
    pub theta: Option<usize>,
    pub lambda: Option<f64>,
    pub strategy: Option<Strategy>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Feedback {
    pub chosen_id: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateView {
    pub id: u64,
    pub lat: f64,
    pub lon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
    pub proximity: f64,
    pub similarity: f64,
}

impl CandidateView {
    pub fn new(tree: &GirTree, c: &Candidate<f64>) -> Self {
        let o = tree.object(c.index);
        Self {
            id: c.id,
            lat: o.location.lat,
            lon: o.location.lon,
            image_url: o.image_url.clone(),
            proximity: c.profile.pair.proximity,
            similarity: c.profile.pair.similarity,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultView {
    pub id: u64,
    pub score: f64,
    pub lat: f64,
    pub lon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
}

impl ResultView {
    pub fn new(tree: &GirTree, r: &RankedObject) -> Self {
        let o = tree.object_by_id(r.id).expect("results come from the index");
        Self {
            id: r.id,
            score: r.score,
            lat: o.location.lat,
            lon: o.location.lon,
            image_url: o.image_url.clone(),
        }
    }
}

/// Body of a round that still waits for a pick.
#[derive(Debug, Clone, Serialize)]
pub struct RoundView {
    pub round: usize,
    pub candidates: Vec<CandidateView>,
}

/// Body of a finished session.
#[derive(Debug, Clone, Serialize)]
pub struct DoneView {
    pub done: bool,
    pub results: Vec<ResultView>,
    pub rounds_used: usize,
    pub p_hat: PreferenceVector,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum StepView {
    Round(RoundView),
    Done(DoneView),
}

#[derive(Debug, Clone, Serialize)]
pub struct Created {
    pub session_id: String,
    #[serde(flatten)]
    pub step: StepView,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryView {
    pub lat: f64,
    pub lon: f64,
    pub words: Vec<u32>,
    pub k: usize,
    pub theta: usize,
    pub lambda: f64,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionState {
    pub session_id: String,
    pub phase: geoprefer_core::Phase,
    pub query: QueryView,
    pub candidate_count: usize,
    pub remaining: usize,
    pub rounds_used: usize,
    pub done: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<CandidateView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<Vec<ResultView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_hat: Option<PreferenceVector>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObjectView {
    pub id: u64,
    pub lat: f64,
    pub lon: f64,
    pub words: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}
