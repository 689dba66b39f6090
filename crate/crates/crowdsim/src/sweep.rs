//! Experiment sweeps: a base config plus parameter axes, expanded into a
//! Cartesian grid of cells with seeded replicates, run and aggregated.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::engine::{run_experiment, Algorithm, RunMetrics, RunOutput};
use crate::error::{Error, Result};
use crate::stats;
use crate::worker::stream_rng;

/// One sweep axis: a parameter name and the values it takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: String,
    pub values: Vec<toml::Value>,
}

/// A sweep document: base run config, axes, and replicate count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default = "default_replicates")]
    pub replicates: u32,
    #[serde(default)]
    pub seed: u64,
    pub base: RunConfig,
    #[serde(default, rename = "axis")]
    pub axes: Vec<Axis>,
}

fn default_replicates() -> u32 {
    1
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SweepSpec =
            toml::from_str(text).map_err(|e| Error::config("<sweep>", e.message().to_string()))?;
        let mut base = spec.base.clone();
        base.apply_baseline()?;
        base.validate()?;
        for axis in &spec.axes {
            if axis.values.is_empty() {
                return Err(Error::config(
                    format!("axis.{}", axis.param),
                    "axis needs at least one value",
                ));
            }
        }
        Ok(SweepSpec { base, ..spec })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Output {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    /// Number of axis combinations (1 for an empty axis list).
    pub fn combo_count(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Expand into runnable cells. Cell seeds derive from (sweep seed, combo
    /// index, replicate) alone, so they are independent of execution order.
    pub fn expand(&self) -> Result<Vec<Cell>> {
        let combos = self.combo_count();
        let mut cells = Vec::with_capacity(combos * self.replicates as usize);
        for combo_index in 0..combos {
            let mut assignments = Vec::new();
            let mut remainder = combo_index;
            for axis in &self.axes {
                let idx = remainder % axis.values.len();
                remainder /= axis.values.len();
                assignments.push((axis.param.clone(), axis.values[idx].clone()));
            }
            for replicate in 0..self.replicates {
                let mut config = self.base.clone();
                for (param, value) in &assignments {
                    apply_param(&mut config, param, value)?;
                }
                let seed =
                    stream_rng(self.seed, &[combo_index as u64, replicate as u64]).gen::<u64>();
                config.seed = seed;
                config.validate()?;
                cells.push(Cell {
                    combo_index,
                    replicate,
                    seed,
                    assignments: assignments.clone(),
                    config,
                });
            }
        }
        Ok(cells)
    }
}

/// One runnable sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub combo_index: usize,
    pub replicate: u32,
    pub seed: u64,
    pub assignments: Vec<(String, toml::Value)>,
    pub config: RunConfig,
}

impl Cell {
    /// Human-readable axis settings, e.g. `PM_ell=8,SM=true`.
    pub fn axis_label(&self) -> String {
        if self.assignments.is_empty() {
            return "base".into();
        }
        self.assignments
            .iter()
            .map(|(p, v)| format!("{p}={}", display_value(v)))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn display_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn value_as_f64(param: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(Error::config(
            format!("axis.{param}"),
            format!("expected number, got {other}"),
        )),
    }
}

fn value_as_usize(param: &str, v: &toml::Value) -> Result<usize> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        other => Err(Error::config(
            format!("axis.{param}"),
            format!("expected non-negative integer, got {other}"),
        )),
    }
}

fn value_as_bool(param: &str, v: &toml::Value) -> Result<bool> {
    match v {
        toml::Value::Boolean(b) => Ok(*b),
        other => Err(Error::config(
            format!("axis.{param}"),
            format!("expected boolean, got {other}"),
        )),
    }
}

/// Set a sweepable parameter on a config.
pub fn apply_param(config: &mut RunConfig, param: &str, value: &toml::Value) -> Result<()> {
    match param {
        "PM_ell" => config.pool.pm_ell = value_as_f64(param, value)?,
        "N_p" => config.pool.n_p = value_as_usize(param, value)?,
        "N_g" => config.batch.n_g = value_as_usize(param, value)? as u32,
        "R" => config.batch.r = value_as_f64(param, value)?,
        "SM" => config.batch.sm = value_as_bool(param, value)?,
        "votes_required" => config.batch.votes_required = value_as_usize(param, value)? as u32,
        "termination_estimate" => {
            config.pool.termination_estimate = value_as_bool(param, value)?;
        }
        "r" => config.learning.r = value_as_f64(param, value)?,
        "Alg" => {
            let s = value.as_str().ok_or_else(|| {
                Error::config("axis.Alg", "expected one of AL, PL, HL, NL".to_string())
            })?;
            config.learning.alg = match s {
                "AL" => Algorithm::AL,
                "PL" => Algorithm::PL,
                "HL" => Algorithm::HL,
                "NL" => Algorithm::NL,
                other => {
                    return Err(Error::config(
                        "axis.Alg",
                        format!("unknown algorithm {other:?}"),
                    ));
                }
            };
        }
        "class_sep" => {
            if let Some(crate::config::DatasetConfig::Generated { params }) =
                config.dataset.as_mut()
            {
                params.class_sep = value_as_f64(param, value)?;
            } else {
                return Err(Error::config(
                    "axis.class_sep",
                    "sweeping class_sep needs a generated dataset",
                ));
            }
        }
        other => {
            return Err(Error::config(
                format!("axis.{other}"),
                "unsupported sweep parameter (supported: PM_ell, N_p, N_g, R, SM, \
                 votes_required, termination_estimate, r, Alg, class_sep)",
            ));
        }
    }
    Ok(())
}

/// Compact per-run summary derived from [`RunMetrics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub batches: u64,
    pub makespan_mean_s: f64,
    pub makespan_median_s: f64,
    pub makespan_std_s: f64,
    pub mpl_mean_s: f64,
    pub replacements_total: u64,
    pub labels: u64,
    pub total_latency_s: f64,
    pub total_cost: f64,
    pub throughput_labels_per_s: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub time_to_target_s: Option<f64>,
    pub objective_score: Option<f64>,
}

impl RunSummary {
    pub fn from_metrics(metrics: &RunMetrics, accuracy_target: Option<f64>) -> Self {
        let makespans = &metrics.batch_makespans_s;
        let time_to_target = accuracy_target.and_then(|target| {
            metrics
                .learning_curve
                .iter()
                .find(|c| c.accuracy >= target)
                .map(|c| c.time_s)
        });
        Self {
            batches: makespans.len() as u64,
            makespan_mean_s: stats::mean(makespans).unwrap_or(0.0),
            makespan_median_s: stats::median(makespans).unwrap_or(0.0),
            makespan_std_s: stats::sample_std(makespans).unwrap_or(0.0),
            mpl_mean_s: stats::mean(&metrics.mpl_per_batch_s).unwrap_or(0.0),
            replacements_total: metrics.replacements_per_batch.iter().sum(),
            labels: metrics.total_labels,
            total_latency_s: metrics.total_latency_s,
            total_cost: metrics.cost.total_cost,
            throughput_labels_per_s: (metrics.total_latency_s > 0.0)
                .then(|| metrics.total_labels as f64 / metrics.total_latency_s),
            final_accuracy: metrics.learning_curve.last().map(|c| c.accuracy),
            time_to_target_s: time_to_target,
            objective_score: metrics.objective.map(|o| o.score),
        }
    }
}

/// One executed cell: axis settings plus either a summary or an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub combo_index: usize,
    pub replicate: u32,
    pub seed: u64,
    pub axes: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<RunSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Stats::default();
        }
        Self {
            mean: stats::mean(values).unwrap(),
            median: stats::median(values).unwrap(),
            std: stats::sample_std(values).unwrap(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Across-replicate aggregates for one axis combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub combo_index: usize,
    pub axes: Vec<(String, String)>,
    pub replicates_ok: u32,
    pub replicates_failed: u32,
    pub makespan_mean_s: Stats,
    pub makespan_std_s: Stats,
    pub mpl_mean_s: Stats,
    pub total_latency_s: Stats,
    pub total_cost: Stats,
    pub replacements_total: Stats,
    pub throughput_labels_per_s: Stats,
    pub final_accuracy: Stats,
    pub time_to_target_s: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub replicates: u32,
    pub seed: u64,
    pub axis_params: Vec<String>,
    pub cells: Vec<CellRecord>,
    pub aggregates: Vec<AggregateRow>,
}

/// Run one cell end to end.
pub fn run_cell(cell: &Cell) -> Result<RunOutput> {
    let population = cell.config.build_population()?;
    let dataset = cell.config.build_dataset()?;
    let params = cell.config.to_params();
    run_experiment(&params, &population, dataset.as_ref())
}

fn cell_axes(cell: &Cell) -> Vec<(String, String)> {
    cell.assignments
        .iter()
        .map(|(p, v)| (p.clone(), display_value(v)))
        .collect()
}

/// Execute every cell of a sweep, observing each finished cell (used by
/// report emission to persist event logs as they complete). A cell failure is
/// recorded and does not abort the others.
pub fn run_sweep_with(
    spec: &SweepSpec,
    mut on_cell: impl FnMut(&Cell, &RunOutput) -> Result<()>,
) -> Result<SweepReport> {
    let cells = spec.expand()?;
    let mut records = Vec::with_capacity(cells.len());
    for cell in &cells {
        let record = match run_cell(cell).and_then(|output| {
            on_cell(cell, &output)?;
            Ok(output)
        }) {
            Ok(output) => CellRecord {
                combo_index: cell.combo_index,
                replicate: cell.replicate,
                seed: cell.seed,
                axes: cell_axes(cell),
                summary: Some(RunSummary::from_metrics(
                    &output.metrics,
                    cell.config.budget.accuracy_target,
                )),
                error: None,
            },
            Err(err) => CellRecord {
                combo_index: cell.combo_index,
                replicate: cell.replicate,
                seed: cell.seed,
                axes: cell_axes(cell),
                summary: None,
                error: Some(err.to_string()),
            },
        };
        records.push(record);
    }
    let aggregates = aggregate(spec, &records);
    Ok(SweepReport {
        replicates: spec.replicates,
        seed: spec.seed,
        axis_params: spec.axes.iter().map(|a| a.param.clone()).collect(),
        cells: records,
        aggregates,
    })
}

/// Execute a sweep without side effects.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    run_sweep_with(spec, |_, _| Ok(()))
}

fn aggregate(spec: &SweepSpec, records: &[CellRecord]) -> Vec<AggregateRow> {
    let combos = spec.combo_count();
    let mut rows = Vec::with_capacity(combos);
    for combo in 0..combos {
        let members: Vec<&CellRecord> = records.iter().filter(|r| r.combo_index == combo).collect();
        if members.is_empty() {
            continue;
        }
        let ok: Vec<&RunSummary> = members.iter().filter_map(|r| r.summary.as_ref()).collect();
        let collect = |f: &dyn Fn(&RunSummary) -> Option<f64>| {
            let values: Vec<f64> = ok.iter().filter_map(|s| f(s)).collect();
            Stats::from_values(&values)
        };
        rows.push(AggregateRow {
            combo_index: combo,
            axes: members[0].axes.clone(),
            replicates_ok: ok.len() as u32,
            replicates_failed: (members.len() - ok.len()) as u32,
            makespan_mean_s: collect(&|s| Some(s.makespan_mean_s)),
            makespan_std_s: collect(&|s| Some(s.makespan_std_s)),
            mpl_mean_s: collect(&|s| Some(s.mpl_mean_s)),
            total_latency_s: collect(&|s| Some(s.total_latency_s)),
            total_cost: collect(&|s| Some(s.total_cost)),
            replacements_total: collect(&|s| Some(s.replacements_total as f64)),
            throughput_labels_per_s: collect(&|s| s.throughput_labels_per_s),
            final_accuracy: collect(&|s| s.final_accuracy),
            time_to_target_s: collect(&|s| s.time_to_target_s),
        });
    }
    rows
}
