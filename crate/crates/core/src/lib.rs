//! Sampling-rate optimization for classifier ensembles, plus a day-by-day
//! replay simulator driven by signature-lifecycle schedules.
//!
//! The pipeline: partition flagged observations into overlap batches
//! ([`batch`]), decide per batch whether sampling it is cost-effective
//! ([`batch::SelectionProblem`]), translate decisions into per-classifier
//! sampling rates — directly when there is no overlap, via OR-factor-graph
//! marginals otherwise ([`inference`]) — then lift rates to severity floors.
//! The [`sim`] module replays synthetic multi-year traces ([`trace`]) against
//! that loop and reports precision/recall/removal outcomes ([`report`]).

pub mod batch;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;
pub mod schedule;
pub mod sim;
pub mod trace;
