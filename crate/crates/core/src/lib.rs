//! Interactive top-k search over geo-tagged objects described by a
//! location and a set of visual words.
//!
//! The pipeline: a [`GirTree`] index answers the k-superior candidate
//! search, a [`Session`] runs pick-the-favourite rounds over the
//! candidates, and the collected constraints yield a preference estimate
//! used for the final ranking.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, and the [`f32`](mod@f32) module
//! offers the single-precision variants.

pub mod error;
pub mod estimation;
pub mod girtree;
pub mod ingest;
pub mod interaction;
pub mod model;
pub mod num;
pub mod oracle;
pub mod scoring;
pub mod session;
pub mod signature;
pub mod workload;

pub use error::{Error, Result};
pub use interaction::{NoSuperiorGraph, Strategy, TerminationReason};
pub use num::Scalar;
pub use scoring::DominanceOutcome;
pub use session::{Phase, Step};
pub use signature::SignatureConfig;

pub type GeoObject = model::GeoObject<f64>;
pub type Query = model::Query<f64>;
pub type PreferenceVector = model::PreferenceVector<f64>;
pub type Constraint = model::Constraint<f64>;
pub type Location = model::Location<f64>;
pub type GirTree = girtree::GirTree<f64>;
pub type Session = session::Session<f64>;
pub type SessionConfig = session::SessionConfig<f64>;
pub type Estimate = estimation::Estimate<f64>;
pub type EstimatorConfig = estimation::EstimatorConfig<f64>;
pub type RankedObject = estimation::RankedObject<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type GeoObject = crate::model::GeoObject<f32>;
    pub type Query = crate::model::Query<f32>;
    pub type PreferenceVector = crate::model::PreferenceVector<f32>;
    pub type Location = crate::model::Location<f32>;
    pub type GirTree = crate::girtree::GirTree<f32>;
    pub type Session = crate::session::Session<f32>;
    pub type SessionConfig = crate::session::SessionConfig<f32>;
}
