//! Discrete-event core: deterministic clock and queue, the persisted event
//! stream, cost accounting, metrics, and experiment orchestration.

pub mod cost;
pub mod event;
pub mod experiment;
pub mod metrics;
pub mod queue;

pub use cost::{objective, CostLedger, CostRates, TerminatedPayPolicy};
pub use event::{read_event_log, write_event_log, EventPayload, LoggedEvent, RunInfo};
pub use experiment::{
    planned_batch_size, run_experiment, run_single_batch, Algorithm, Budget, ExperimentParams,
    RunOutput,
};
pub use metrics::{CurvePoint, LabelPoint, ObjectiveReport, RunMetrics};
pub use queue::{EventQueue, QueueEntry};
