//! The persisted event stream.
//!
//! Every handler activation that changed state is logged as one line:
//!
//! ```text
//! time,sequence,kind,payload-json-object
//! ```
//!
//! Payloads carry the handler's full effects (assignments started, pay
//! amounts, terminations, quorum labels), so metrics and the cost ledger are
//! pure folds over the stream and a persisted log replays to identical
//! results.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Run-level constants embedded in the bootstrap event so a bare log file
/// replays without its config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub seed: u64,
    pub beta: f64,
    pub records_per_task: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayInfo {
    pub slot_id: u64,
    pub worker_uid: u64,
    pub amount: f64,
}

/// An assignment issued to a worker, with the wait pay accrued for the idle
/// span that ended when work started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartedAssignment {
    pub assignment_id: u64,
    pub task_id: u64,
    pub slot_id: u64,
    pub worker_uid: u64,
    pub idle_s: f64,
    pub wait_pay: f64,
}

/// An assignment cut short, with its termination pay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationInfo {
    pub assignment_id: u64,
    pub task_id: u64,
    pub slot_id: u64,
    pub worker_uid: u64,
    pub pay: f64,
    /// True when the task went back to the unassigned set (eviction mid-task).
    pub task_returned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSlot {
    pub slot_id: u64,
    pub worker_uid: u64,
    pub worker_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecruitmentReadyEvent {
    pub worker_ids: Vec<String>,
    pub recruit_pay: f64,
    /// True for the bootstrap event that seats the initial pool and reserve.
    pub prewarm: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_pool: Option<Vec<InitialSlot>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_info: Option<RunInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuorumInfo {
    pub task_id: u64,
    /// (record id, majority label) per record in the task.
    pub labels: Vec<(u64, u32)>,
    /// Completion time minus the batch dispatch time.
    pub task_latency_s: f64,
    pub new_labels: u64,
    pub total_labels: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchCompleteInfo {
    pub batch_index: u64,
    pub makespan_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentFinishEvent {
    pub assignment_id: u64,
    pub task_id: u64,
    pub slot_id: u64,
    pub worker_uid: u64,
    pub batch_index: u64,
    pub latency_s: f64,
    pub per_label_latency_s: f64,
    pub records: u32,
    pub work_pay: f64,
    /// False when the answer arrived after quorum and was ignored (audit).
    pub credited: bool,
    pub votes: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quorum: Option<QuorumInfo>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terminated: Vec<TerminationInfo>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub started: Vec<StartedAssignment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_complete: Option<BatchCompleteInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEndInfo {
    pub reason: String,
    pub wait_pay: Vec<PayInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_accuracy: Option<f64>,
    pub final_labels: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchDispatchEvent {
    /// "batch_start", "worker_free", or "run_end".
    pub trigger: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub task_ids: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub active_points: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub passive_points: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontier_version: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub started: Vec<StartedAssignment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_end: Option<RunEndInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvictionRecord {
    pub slot_id: u64,
    pub worker_uid: u64,
    pub worker_id: String,
    pub estimated_latency_s: f64,
    pub replacement_slot_id: u64,
    pub replacement_uid: u64,
    pub replacement_id: String,
    /// In-flight assignment cut by the eviction, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminated: Option<TerminationInfo>,
    pub wait_pay: f64,
    pub idle_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceTickEvent {
    pub batch_index: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evictions: Vec<EvictionRecord>,
    pub recruits_requested: u64,
    pub reserve_ready: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub started: Vec<StartedAssignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainDoneEvent {
    pub model_version: u64,
    pub trained_on: u64,
    pub total_labels: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_accuracy: Option<f64>,
    pub frontier_size: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventPayload {
    AssignmentFinish(AssignmentFinishEvent),
    RecruitmentReady(RecruitmentReadyEvent),
    RetrainDone(RetrainDoneEvent),
    MaintenanceTick(MaintenanceTickEvent),
    BatchDispatch(BatchDispatchEvent),
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::AssignmentFinish(_) => "assignment_finish",
            EventPayload::RecruitmentReady(_) => "recruitment_ready",
            EventPayload::RetrainDone(_) => "retrain_done",
            EventPayload::MaintenanceTick(_) => "maintenance_tick",
            EventPayload::BatchDispatch(_) => "batch_dispatch",
        }
    }

    fn to_json(&self) -> serde_json::Result<String> {
        match self {
            EventPayload::AssignmentFinish(e) => serde_json::to_string(e),
            EventPayload::RecruitmentReady(e) => serde_json::to_string(e),
            EventPayload::RetrainDone(e) => serde_json::to_string(e),
            EventPayload::MaintenanceTick(e) => serde_json::to_string(e),
            EventPayload::BatchDispatch(e) => serde_json::to_string(e),
        }
    }
}

/// One persisted simulation event.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedEvent {
    pub time_s: f64,
    pub sequence: u64,
    pub payload: EventPayload,
}

impl LoggedEvent {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{}",
            serde_json::to_string(&self.time_s).expect("f64 serializes"),
            self.sequence,
            self.payload.kind(),
            self.payload.to_json().expect("payload serializes"),
        )
    }

    pub fn from_line(line: &str, line_no: usize) -> Result<Self> {
        let bad = |reason: String| Error::EventLog {
            line: line_no,
            reason,
        };
        let mut parts = line.splitn(4, ',');
        let time_s: f64 = parts
            .next()
            .ok_or_else(|| bad("missing time".into()))?
            .parse()
            .map_err(|e| bad(format!("bad time: {e}")))?;
        let sequence: u64 = parts
            .next()
            .ok_or_else(|| bad("missing sequence".into()))?
            .parse()
            .map_err(|e| bad(format!("bad sequence: {e}")))?;
        let kind = parts.next().ok_or_else(|| bad("missing kind".into()))?;
        let json = parts.next().ok_or_else(|| bad("missing payload".into()))?;
        let payload = match kind {
            "assignment_finish" => EventPayload::AssignmentFinish(
                serde_json::from_str(json).map_err(|e| bad(e.to_string()))?,
            ),
            "recruitment_ready" => EventPayload::RecruitmentReady(
                serde_json::from_str(json).map_err(|e| bad(e.to_string()))?,
            ),
            "retrain_done" => EventPayload::RetrainDone(
                serde_json::from_str(json).map_err(|e| bad(e.to_string()))?,
            ),
            "maintenance_tick" => EventPayload::MaintenanceTick(
                serde_json::from_str(json).map_err(|e| bad(e.to_string()))?,
            ),
            "batch_dispatch" => EventPayload::BatchDispatch(
                serde_json::from_str(json).map_err(|e| bad(e.to_string()))?,
            ),
            other => return Err(bad(format!("unknown event kind {other:?}"))),
        };
        Ok(LoggedEvent {
            time_s,
            sequence,
            payload,
        })
    }
}

/// Write an event log, one line per event.
pub fn write_event_log(events: &[LoggedEvent], mut writer: impl Write) -> Result<()> {
    for event in events {
        writeln!(writer, "{}", event.to_line())?;
    }
    Ok(())
}

/// Parse an event log written by [`write_event_log`].
pub fn read_event_log(reader: impl BufRead) -> Result<Vec<LoggedEvent>> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(LoggedEvent::from_line(&line, idx + 1)?);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let event = LoggedEvent {
            time_s: 12.5,
            sequence: 3,
            payload: EventPayload::RetrainDone(RetrainDoneEvent {
                model_version: 2,
                trained_on: 40,
                total_labels: 40,
                holdout_accuracy: Some(0.875),
                frontier_size: 100,
            }),
        };
        let line = event.to_line();
        assert!(line.starts_with("12.5,3,retrain_done,{"));
        let parsed = LoggedEvent::from_line(&line, 1).unwrap();
        assert_eq!(parsed, event);
    }

    #[test]
    fn payload_json_commas_survive_parsing() {
        let event = LoggedEvent {
            time_s: 0.0,
            sequence: 0,
            payload: EventPayload::BatchDispatch(BatchDispatchEvent {
                trigger: "batch_start".into(),
                batch_index: Some(0),
                task_ids: vec![1, 2, 3],
                active_points: vec![5, 6],
                passive_points: vec![7],
                frontier_version: None,
                started: vec![],
                run_end: None,
            }),
        };
        let parsed = LoggedEvent::from_line(&event.to_line(), 1).unwrap();
        assert_eq!(parsed, event);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = LoggedEvent::from_line("not-a-number,0,batch_dispatch,{}", 7).unwrap_err();
        match err {
            Error::EventLog { line, .. } => assert_eq!(line, 7),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
