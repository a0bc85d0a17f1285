//! Global, model-agnostic rule-set explanations for black-box classifiers.
//!
//! The crate turns any classifier that answers `predict_proba` over tabular
//! rows into a decision set: independent `IF conditions THEN class` rules.
//! Conditions are mined per instance from locally weighted linear surrogates,
//! combined into rules by a per-class genetic algorithm maximising rule
//! mutual information minus a length penalty, then filtered, ranked and
//! scored for fidelity with Imitation@K.
//!
//! Module map:
//!
//! * [`dataset`]: CSV loading, entropy (MDLP) binning, stratified splits.
//! * [`blackbox`]: the classifier contract, a built-in random forest and the
//!   host side of the subprocess bridge.
//! * [`local_explain`]: local surrogate fits and instance-level conditions.
//! * [`rules`]: conditions, rules, covers, contingency tables and RMI.
//! * [`evolve`]: the bit-string genetic algorithm.
//! * [`refine`]: domination pruning, held-out baseline test, RMI ranking.
//! * [`fidelity`]: the rule-based proxy model and Imitation@K.
//! * [`pipeline`]: end-to-end orchestration, reports and rendering.

pub mod blackbox;
pub mod dataset;
pub mod error;
pub mod evolve;
pub mod fidelity;
pub mod local_explain;
pub mod pipeline;
pub mod refine;
pub mod rules;
pub mod seed;

pub use error::{Error, Result};
