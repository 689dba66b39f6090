//! Report emission: per-run data files (assignment log, label/latency
//! series, learning curves, latency percentiles), sweep summaries, and
//! re-aggregation of persisted event logs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::engine::{
    read_event_log, write_event_log, EventPayload, LoggedEvent, RunMetrics, RunOutput,
};
use crate::error::{Error, Result};
use crate::stats;
use crate::sweep::{Cell, RunSummary, SweepReport, SweepSpec};

/// Worker-age slice boundaries (tasks completed before the measured one).
pub const AGE_SLICES: [(u64, Option<u64>); 4] =
    [(0, Some(5)), (5, Some(15)), (15, Some(30)), (30, None)];

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Output {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Output {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    write_file(path, &(json + "\n"))
}

/// One row of the assignment log export.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentRow {
    pub assignment_id: u64,
    pub task_id: u64,
    pub slot_id: u64,
    pub start_s: f64,
    pub end_s: Option<f64>,
    pub status: &'static str,
}

/// Rebuild the per-assignment timeline from an event stream.
pub fn assignments_from_events(events: &[LoggedEvent]) -> Vec<AssignmentRow> {
    let mut rows: BTreeMap<u64, AssignmentRow> = BTreeMap::new();
    let start = |started: &[crate::engine::event::StartedAssignment],
                 time: f64,
                 rows: &mut BTreeMap<u64, AssignmentRow>| {
        for s in started {
            rows.insert(
                s.assignment_id,
                AssignmentRow {
                    assignment_id: s.assignment_id,
                    task_id: s.task_id,
                    slot_id: s.slot_id,
                    start_s: time,
                    end_s: None,
                    status: "running",
                },
            );
        }
    };
    for event in events {
        match &event.payload {
            EventPayload::BatchDispatch(e) => start(&e.started, event.time_s, &mut rows),
            EventPayload::MaintenanceTick(e) => {
                start(&e.started, event.time_s, &mut rows);
                for ev in &e.evictions {
                    if let Some(t) = &ev.terminated {
                        if let Some(row) = rows.get_mut(&t.assignment_id) {
                            row.end_s = Some(event.time_s);
                            row.status = "terminated";
                        }
                    }
                }
            }
            EventPayload::AssignmentFinish(e) => {
                start(&e.started, event.time_s, &mut rows);
                if let Some(row) = rows.get_mut(&e.assignment_id) {
                    row.end_s = Some(event.time_s);
                    row.status = "finished";
                }
                for t in &e.terminated {
                    if let Some(row) = rows.get_mut(&t.assignment_id) {
                        row.end_s = Some(event.time_s);
                        row.status = "terminated";
                    }
                }
            }
            _ => {}
        }
    }
    rows.into_values().collect()
}

fn assignment_log_csv(events: &[LoggedEvent]) -> String {
    let mut out = String::from("assignment_id,task_id,slot_id,start_s,end_s,status\n");
    for row in assignments_from_events(events) {
        let end = row.end_s.map_or(String::new(), |e| format!("{e}"));
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.assignment_id, row.task_id, row.slot_id, row.start_s, end, row.status
        ));
    }
    out
}

/// Per-label latency percentiles by worker-age slice (tasks completed by the
/// worker before the measured one).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgeSliceRow {
    pub age_slice: String,
    pub count: usize,
    pub p50_s: f64,
    pub p95_s: f64,
    pub p99_s: f64,
}

pub fn latency_percentiles_by_age(events: &[LoggedEvent]) -> Vec<AgeSliceRow> {
    let mut completed: BTreeMap<u64, u64> = BTreeMap::new();
    let mut slices: Vec<Vec<f64>> = vec![Vec::new(); AGE_SLICES.len()];
    for event in events {
        if let EventPayload::AssignmentFinish(e) = &event.payload {
            let age = completed.entry(e.worker_uid).or_insert(0);
            let slice = AGE_SLICES
                .iter()
                .position(|(lo, hi)| *age >= *lo && hi.is_none_or(|h| *age < h))
                .unwrap();
            slices[slice].push(e.per_label_latency_s);
            *age += 1;
        }
    }
    AGE_SLICES
        .iter()
        .zip(slices)
        .map(|((lo, hi), mut values)| {
            values.sort_by(|a, b| a.total_cmp(b));
            let label = match hi {
                Some(h) => format!("{lo}-{h}"),
                None => format!("{lo}+"),
            };
            AgeSliceRow {
                age_slice: label,
                count: values.len(),
                p50_s: stats::percentile(&values, 50.0).unwrap_or(0.0),
                p95_s: stats::percentile(&values, 95.0).unwrap_or(0.0),
                p99_s: stats::percentile(&values, 99.0).unwrap_or(0.0),
            }
        })
        .collect()
}

fn percentiles_csv(events: &[LoggedEvent]) -> String {
    let mut out = String::from("age_slice,count,p50_s,p95_s,p99_s\n");
    for row in latency_percentiles_by_age(events) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.age_slice, row.count, row.p50_s, row.p95_s, row.p99_s
        ));
    }
    out
}

fn labels_csv(metrics: &RunMetrics) -> String {
    let mut out = String::from("time_s,total_labels\n");
    for p in &metrics.labels_over_time {
        out.push_str(&format!("{},{}\n", p.time_s, p.total_labels));
    }
    out
}

fn batches_csv(metrics: &RunMetrics) -> String {
    let mut out = String::from("batch_index,dispatch_time_s,makespan_s,mpl_s,replacements\n");
    for (i, makespan) in metrics.batch_makespans_s.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i,
            metrics
                .batch_dispatch_times_s
                .get(i)
                .copied()
                .unwrap_or(0.0),
            makespan,
            metrics.mpl_per_batch_s.get(i).copied().unwrap_or(0.0),
            metrics.replacements_per_batch.get(i).copied().unwrap_or(0),
        ));
    }
    out
}

fn curve_csv(metrics: &RunMetrics) -> String {
    let mut out = String::from("wallclock_s,n_labels,accuracy\n");
    for p in &metrics.learning_curve {
        out.push_str(&format!("{},{},{}\n", p.time_s, p.n_labels, p.accuracy));
    }
    out
}

/// Write a single run's report files into `dir`:
/// `events.log`, `metrics.json`, `summary.json`, `assignment_log.csv`,
/// `labels_over_time.csv`, `batches.csv`, `learning_curve.csv`,
/// `latency_percentiles.csv`.
pub fn emit_run(output: &RunOutput, accuracy_target: Option<f64>, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mut log = Vec::new();
    write_event_log(&output.events, &mut log)?;
    fs::write(dir.join("events.log"), log).map_err(|e| Error::Output {
        path: dir.join("events.log"),
        source: e,
    })?;
    write_file(
        dir.join("metrics.json").as_path(),
        &(output.metrics.to_json() + "\n"),
    )?;
    write_json(
        dir.join("summary.json").as_path(),
        &RunSummary::from_metrics(&output.metrics, accuracy_target),
    )?;
    write_file(
        dir.join("assignment_log.csv").as_path(),
        &assignment_log_csv(&output.events),
    )?;
    write_file(
        dir.join("labels_over_time.csv").as_path(),
        &labels_csv(&output.metrics),
    )?;
    write_file(
        dir.join("batches.csv").as_path(),
        &batches_csv(&output.metrics),
    )?;
    write_file(
        dir.join("learning_curve.csv").as_path(),
        &curve_csv(&output.metrics),
    )?;
    write_file(
        dir.join("latency_percentiles.csv").as_path(),
        &percentiles_csv(&output.events),
    )?;
    Ok(())
}

fn cell_dir(dir: &Path, cell: &Cell) -> PathBuf {
    dir.join("cells").join(format!(
        "cell-{:03}-rep{:02}",
        cell.combo_index, cell.replicate
    ))
}

fn cells_csv(report: &SweepReport) -> String {
    let mut out = String::from("combo_index,replicate,seed,axes,batches,makespan_mean_s,makespan_std_s,mpl_mean_s,total_latency_s,total_cost,throughput_labels_per_s,final_accuracy,time_to_target_s,error\n");
    for cell in &report.cells {
        let axes = cell
            .axes
            .iter()
            .map(|(p, v)| format!("{p}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        match &cell.summary {
            Some(s) => out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},\n",
                cell.combo_index,
                cell.replicate,
                cell.seed,
                axes,
                s.batches,
                s.makespan_mean_s,
                s.makespan_std_s,
                s.mpl_mean_s,
                s.total_latency_s,
                s.total_cost,
                opt(s.throughput_labels_per_s),
                opt(s.final_accuracy),
                opt(s.time_to_target_s),
            )),
            None => out.push_str(&format!(
                "{},{},{},{},,,,,,,,,,{}\n",
                cell.combo_index,
                cell.replicate,
                cell.seed,
                axes,
                cell.error.as_deref().unwrap_or("unknown"),
            )),
        }
    }
    out
}

/// Run a sweep and write `summary.json`, `cells.csv`, and per-cell run
/// reports (with event logs) under `dir`.
pub fn emit_sweep(spec: &SweepSpec, dir: &Path) -> Result<SweepReport> {
    create_dir(dir)?;
    let report = crate::sweep::run_sweep_with(spec, |cell, output| {
        emit_run(
            output,
            cell.config.budget.accuracy_target,
            &cell_dir(dir, cell),
        )
    })?;
    write_json(dir.join("summary.json").as_path(), &report)?;
    write_file(dir.join("cells.csv").as_path(), &cells_csv(&report))?;
    Ok(report)
}

/// Recompute a run report from a persisted event log.
pub fn replay_log(path: &Path) -> Result<(Vec<LoggedEvent>, RunMetrics)> {
    let file = fs::File::open(path).map_err(|e| Error::Output {
        path: path.to_path_buf(),
        source: e,
    })?;
    let events = read_event_log(BufReader::new(file))?;
    let metrics = RunMetrics::from_events(&events);
    Ok((events, metrics))
}

/// Rebuild reports from the event logs persisted under `dir` (a single run
/// directory containing `events.log`, or a sweep directory with
/// `cells/*/events.log`), writing recomputed outputs into `out_dir`.
pub fn reaggregate(dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut logs = Vec::new();
    let single = dir.join("events.log");
    if single.is_file() {
        logs.push(single);
    }
    let cells = dir.join("cells");
    if cells.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(&cells)
            .map_err(|e| Error::Output {
                path: cells.clone(),
                source: e,
            })?
            .filter_map(|e| e.ok())
            .map(|e| e.path().join("events.log"))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        logs.extend(entries);
    }
    if logs.is_empty() {
        return Err(Error::config(
            dir.display().to_string(),
            "no events.log found (expected a run or sweep output directory)",
        ));
    }
    create_dir(out_dir)?;
    let mut written = Vec::new();
    for log in &logs {
        let (events, metrics) = replay_log(log)?;
        let name = log
            .parent()
            .and_then(|p| p.file_name())
            .map_or_else(|| "run".to_string(), |n| n.to_string_lossy().into_owned());
        let target = if logs.len() == 1 {
            out_dir.to_path_buf()
        } else {
            out_dir.join(&name)
        };
        let output = RunOutput {
            metrics,
            events,
            assignments: Vec::new(),
        };
        emit_run(&output, None, &target)?;
        written.push(target);
    }
    Ok(written)
}

/// Write events to a writer as a log (re-exported convenience for the CLI).
pub fn events_to_writer(events: &[LoggedEvent], writer: impl Write) -> Result<()> {
    write_event_log(events, writer)
}
