//! Run metrics as a pure fold over the event stream.
//!
//! Because everything here derives from logged events, replaying a persisted
//! log reproduces the metrics of the original run exactly.

use serde::{Deserialize, Serialize};

use super::cost::{objective, CostLedger};
use super::event::{EventPayload, LoggedEvent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelPoint {
    pub time_s: f64,
    pub total_labels: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub time_s: f64,
    pub n_labels: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub beta: f64,
    pub denominator: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub batch_dispatch_times_s: Vec<f64>,
    pub batch_makespans_s: Vec<f64>,
    /// Task completion time minus its batch dispatch time, in completion order.
    pub per_task_latency_s: Vec<f64>,
    /// Mean per-label latency of assignments finished in each batch.
    pub mpl_per_batch_s: Vec<f64>,
    pub labels_over_time: Vec<LabelPoint>,
    pub replacements_per_batch: Vec<u64>,
    pub learning_curve: Vec<CurvePoint>,
    pub assignments_started: u64,
    pub assignments_finished: u64,
    pub assignments_terminated: u64,
    pub tasks_completed: u64,
    pub total_labels: u64,
    /// Final clock minus first batch dispatch; excludes up-front recruitment.
    pub total_latency_s: f64,
    pub cost: CostLedger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveReport>,
    pub end_reason: String,
}

impl RunMetrics {
    /// Fold a run's event stream into its metrics.
    pub fn from_events(events: &[LoggedEvent]) -> Self {
        let mut m = RunMetrics::default();
        let mut beta = 0.5;
        let mut first_dispatch: Option<f64> = None;
        let mut end_time: Option<f64> = None;
        let mut open_batch: Option<(u64, Vec<f64>)> = None; // (index, per-label latencies)

        for event in events {
            match &event.payload {
                EventPayload::RecruitmentReady(e) => {
                    if let Some(info) = &e.run_info {
                        beta = info.beta;
                    }
                }
                EventPayload::BatchDispatch(e) => {
                    m.assignments_started += e.started.len() as u64;
                    match e.trigger.as_str() {
                        "batch_start" => {
                            first_dispatch.get_or_insert(event.time_s);
                            m.batch_dispatch_times_s.push(event.time_s);
                            m.replacements_per_batch.push(0);
                            open_batch = Some((e.batch_index.unwrap_or(0), Vec::new()));
                        }
                        "run_end" => {
                            end_time = Some(event.time_s);
                            if let Some(end) = &e.run_end {
                                m.end_reason = end.reason.clone();
                                if let Some(acc) = end.final_accuracy {
                                    let stale = m
                                        .learning_curve
                                        .last()
                                        .is_none_or(|c| c.n_labels < end.final_labels);
                                    if stale {
                                        m.learning_curve.push(CurvePoint {
                                            time_s: event.time_s,
                                            n_labels: end.final_labels,
                                            accuracy: acc,
                                        });
                                    }
                                }
                            }
                        }
                        _ => {}
                    }
                }
                EventPayload::AssignmentFinish(e) => {
                    m.assignments_finished += 1;
                    m.assignments_terminated += e.terminated.len() as u64;
                    m.assignments_started += e.started.len() as u64;
                    if let Some((_, latencies)) = open_batch.as_mut() {
                        latencies.push(e.per_label_latency_s);
                    }
                    if let Some(q) = &e.quorum {
                        m.tasks_completed += 1;
                        m.per_task_latency_s.push(q.task_latency_s);
                        m.total_labels = q.total_labels;
                        m.labels_over_time.push(LabelPoint {
                            time_s: event.time_s,
                            total_labels: q.total_labels,
                        });
                    }
                    if let Some(b) = &e.batch_complete {
                        m.batch_makespans_s.push(b.makespan_s);
                        if let Some((_, latencies)) = open_batch.take() {
                            let mpl = if latencies.is_empty() {
                                0.0
                            } else {
                                latencies.iter().sum::<f64>() / latencies.len() as f64
                            };
                            m.mpl_per_batch_s.push(mpl);
                        }
                    }
                }
                EventPayload::MaintenanceTick(e) => {
                    m.assignments_started += e.started.len() as u64;
                    m.assignments_terminated += e
                        .evictions
                        .iter()
                        .filter(|ev| ev.terminated.is_some())
                        .count() as u64;
                    if let Some(count) = m.replacements_per_batch.last_mut() {
                        *count += e.evictions.len() as u64;
                    }
                }
                EventPayload::RetrainDone(e) => {
                    if let Some(acc) = e.holdout_accuracy {
                        m.learning_curve.push(CurvePoint {
                            time_s: event.time_s,
                            n_labels: e.trained_on,
                            accuracy: acc,
                        });
                    }
                }
            }
        }

        m.total_latency_s = match (first_dispatch, end_time) {
            (Some(start), Some(end)) => end - start,
            _ => 0.0,
        };
        m.cost = CostLedger::from_events(events);
        m.objective = objective(m.total_latency_s, m.cost.total_cost, beta)
            .ok()
            .map(|score| ObjectiveReport {
                beta,
                denominator: beta * m.total_latency_s + (1.0 - beta) * m.cost.total_cost,
                score,
            });
        m
    }

    /// Serialized form used for byte-identity comparisons.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stream_folds_to_empty_metrics() {
        let m = RunMetrics::from_events(&[]);
        assert!(m.batch_makespans_s.is_empty());
        assert_eq!(m.total_latency_s, 0.0);
        assert_eq!(m.cost.total_cost, 0.0);
        assert!(m.objective.is_none());
    }
}
