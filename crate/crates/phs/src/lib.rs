//! phs: parallel hyperparameter search.
//!
//! Evaluates a black-box objective over a declared parameter space using
//! explicit, random, and Gaussian-process strategies, scheduled
//! asynchronously across a worker pool, with persistent trial records and
//! figure regeneration from those records.

pub mod acquisition;
pub mod config;
pub mod engine;
pub mod plan;
pub mod report;
pub mod space;
pub mod store;
pub mod surrogate;
pub mod targets;

pub use engine::{run_experiment, ExperimentConfig, ExperimentSummary, WorkerPool};
pub use space::{ParamValue, ParameterSet, ParameterSpec, SearchSpace};
pub use store::{best_trial, TrialRecord, TrialStore};
