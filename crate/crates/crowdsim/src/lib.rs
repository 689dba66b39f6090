//! Deterministic discrete-event simulation of crowd-sourced data labeling.
//!
//! The library models a retainer pool of stochastic crowd workers and the
//! latency optimizations that make batch labeling fast and predictable:
//!
//! - **Straggler mitigation** — duplicate assignments for slow in-flight
//!   tasks, first answer wins ([`scheduler`]).
//! - **Pool maintenance** — threshold eviction of slow workers backed by a
//!   one-sided significance test and a censoring-corrected latency estimate
//!   ([`pool`]).
//! - **Hybrid learning** — a split of each labeling batch between
//!   uncertainty-sampled and random points, with asynchronous stale-model
//!   retraining ([`learning`]).
//!
//! Runs are seeded and reproducible: the same configuration and seed yield
//! byte-identical metrics, and every run emits a replayable event log from
//! which all metrics and costs can be recomputed ([`engine`]).

// Validators reject NaN parameters via negated comparisons (`!(x > 0.0)`);
// the partial_cmp spelling clippy prefers obscures that intent.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod error;
pub mod learning;
pub mod pool;
pub mod report;
pub mod scheduler;
pub mod stats;
pub mod sweep;
pub mod worker;

pub use error::{Error, Result};
