//! Analysis toolkit for change in temporal knowledge bases.
//!
//! Facts are quintuples `(s, p, o, t_v, t_a)` with an optional valid time
//! and a mandatory transaction time. Given two KB snapshots the toolkit
//! diffs (subject, property) pairs, classifies each observed change as a
//! real-world change, a delayed completion or a correction via three
//! heuristic criteria, filters inherently stable entities and properties,
//! trains per-property logistic-regression change predictors over several
//! feature families, and estimates inter-change-time densities.
//!
//! Modules:
//! - [`kb_model`] - facts, snapshots, pair states, stability predicate
//! - [`ingest`] - file formats and the Wikidata entity-dump adapter
//! - [`change_analysis`] - snapshot diffing and change-cause criteria
//! - [`stability_filters`] - stable-entity and stable-property filters
//! - [`feature_extraction`] - BoW/tf-idf, structured, age, embedding-kNN features
//! - [`predictor`] - balanced datasets and logistic-regression training
//! - [`temporal_density`] - inter-change times, histogram, Gaussian KDE
//! - [`synth`] - synthetic evolving-KB generator with ground-truth causes

pub mod change_analysis;
pub mod error;
pub mod feature_extraction;
pub mod ingest;
pub mod kb_model;
pub mod metrics;
pub mod predictor;
pub mod stability_filters;
pub mod synth;
pub mod temporal_density;

pub use error::{Error, Result};
pub use kb_model::{
    EntityId, Fact, Interval, KbTimestamp, ObjectValue, PairRecord, PairState, Precision,
    PropertyId, Snapshot, StabilityMode,
};
