//! Run configuration: a single TOML document covering the worker population,
//! pool maintenance, batch scheduling, learning, budgets, and pay rates.
//!
//! Key names follow the experiment-parameter vocabulary used throughout the
//! docs (`N_p`, `N_g`, `R`, `PM_ell`, `SM`, `Alg`); `PM_ell = inf` disables
//! pool maintenance.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{Algorithm, Budget, CostRates, ExperimentParams, TerminatedPayPolicy};
use crate::error::{Error, Result};
use crate::learning::{dataset, Dataset, GeneratorParams, RetrainConfig, TrainParams};
use crate::pool::PoolConfig;
use crate::scheduler::RoutingPolicy;
use crate::worker::{PopulationSpec, WorkerPopulation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PopulationConfig {
    /// Synthesize `count` workers from a latency distribution family.
    Synthetic {
        count: usize,
        #[serde(default)]
        seed: u64,
        #[serde(flatten)]
        spec: PopulationSpec,
    },
    /// Load per-worker profiles from a `worker_id,latency_s[,correct]` trace.
    Trace { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolSection {
    #[serde(rename = "N_p")]
    pub n_p: usize,
    /// Per-label eviction threshold in seconds; `inf` disables maintenance.
    #[serde(rename = "PM_ell")]
    pub pm_ell: f64,
    /// Smoothing term of the termination-adjusted latency estimate.
    pub alpha: f64,
    pub significance_level: f64,
    pub min_observations: u64,
    pub termination_estimate: bool,
    pub reserve_watermark_frac: f64,
    pub recruitment_lead_time_s: f64,
    pub maintenance_interval_s: f64,
    pub prewarm_reserve: bool,
}

impl Default for PoolSection {
    fn default() -> Self {
        Self {
            n_p: 15,
            pm_ell: f64::INFINITY,
            alpha: 1.0,
            significance_level: 0.05,
            min_observations: 3,
            termination_estimate: true,
            reserve_watermark_frac: 0.2,
            recruitment_lead_time_s: 180.0,
            maintenance_interval_s: 60.0,
            prewarm_reserve: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchSection {
    #[serde(rename = "N_g")]
    pub n_g: u32,
    #[serde(rename = "R")]
    pub r: f64,
    /// Straggler mitigation.
    #[serde(rename = "SM")]
    pub sm: bool,
    pub votes_required: u32,
    pub routing: RoutingPolicy,
    pub switch_overhead_s: f64,
    pub latency_floor_s: f64,
    /// Send the whole remaining budget as one batch.
    pub single_batch: bool,
    /// Delay before the initial workforce is available (0 for a warm pool).
    pub initial_worker_delay_s: f64,
}

impl Default for BatchSection {
    fn default() -> Self {
        Self {
            n_g: 5,
            r: 1.0,
            sm: true,
            votes_required: 1,
            routing: RoutingPolicy::Random,
            switch_overhead_s: 2.0,
            latency_floor_s: 0.1,
            single_batch: false,
            initial_worker_delay_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningSection {
    #[serde(rename = "Alg")]
    pub alg: Algorithm,
    /// Active fraction of each round under HL.
    pub r: f64,
    pub candidate_sample_size: usize,
    pub holdout_frac: f64,
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: u32,
    pub decision_latency_base_s: f64,
    pub decision_latency_per_label_s: f64,
    /// Loss weight for actively selected points; defaults to the active
    /// fraction (the k/p ratio). Experimental knob.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_weight: Option<f64>,
}

impl Default for LearningSection {
    fn default() -> Self {
        Self {
            alg: Algorithm::NL,
            r: 0.5,
            candidate_sample_size: 1000,
            holdout_frac: 0.2,
            l2: 1e-4,
            learning_rate: 0.5,
            epochs: 300,
            decision_latency_base_s: 1.0,
            decision_latency_per_label_s: 0.02,
            active_weight: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetConfig {
    Generated {
        #[serde(flatten)]
        params: GeneratorParams,
    },
    /// Delimited feature file, rows `label,f1,...,fd`.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RatesSection {
    pub wait_per_minute: f64,
    pub work_per_record: f64,
    pub recruit_fee: f64,
    pub terminated_pay: TerminatedPayPolicy,
}

impl Default for RatesSection {
    fn default() -> Self {
        let d = CostRates::default();
        Self {
            wait_per_minute: d.wait_per_minute,
            work_per_record: d.work_per_record,
            recruit_fee: d.recruit_fee,
            terminated_pay: d.terminated_pay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BudgetSection {
    pub max_labels: Option<u64>,
    pub max_tasks: Option<u64>,
    pub max_batches: Option<u64>,
    pub accuracy_target: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveSection {
    pub beta: f64,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        Self { beta: 0.5 }
    }
}

/// One experiment run's full configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Built-in preset: "base-nr" (no retainer semantics: one cold batch,
    /// passive learning, no mitigation or maintenance) or "base-r" (warm
    /// retainer pool with active learning, no mitigation or maintenance).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    pub population: PopulationConfig,
    #[serde(default)]
    pub pool: PoolSection,
    #[serde(default)]
    pub batch: BatchSection,
    #[serde(default)]
    pub learning: LearningSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetConfig>,
    #[serde(default)]
    pub budget: BudgetSection,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub objective: ObjectiveSection,
}

impl RunConfig {
    /// Parse and validate a config document, expanding any baseline preset.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::config("<config>", e.message().to_string()))?;
        cfg.apply_baseline()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Output {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply_baseline(&mut self) -> Result<()> {
        let Some(name) = self.baseline.clone() else {
            return Ok(());
        };
        match name.as_str() {
            "base-nr" => {
                self.batch.sm = false;
                self.pool.pm_ell = f64::INFINITY;
                self.learning.alg = Algorithm::PL;
                self.batch.single_batch = true;
                self.batch.initial_worker_delay_s = self.pool.recruitment_lead_time_s;
            }
            "base-r" => {
                self.batch.sm = false;
                self.pool.pm_ell = f64::INFINITY;
                self.learning.alg = Algorithm::AL;
                self.batch.single_batch = false;
                self.batch.initial_worker_delay_s = 0.0;
            }
            other => {
                return Err(Error::config(
                    "baseline",
                    format!("unknown baseline {other:?} (expected base-nr or base-r)"),
                ));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, path: &str, reason: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::config(path, reason.to_string()))
            }
        }
        check(self.pool.n_p >= 1, "pool.N_p", "must be >= 1")?;
        check(
            self.pool.pm_ell > 0.0,
            "pool.PM_ell",
            "must be > 0 (inf disables maintenance)",
        )?;
        check(self.pool.alpha >= 0.0, "pool.alpha", "must be >= 0")?;
        check(
            self.pool.significance_level > 0.0 && self.pool.significance_level < 1.0,
            "pool.significance_level",
            "must be in (0, 1)",
        )?;
        check(
            (0.0..=1.0).contains(&self.pool.reserve_watermark_frac),
            "pool.reserve_watermark_frac",
            "must be in [0, 1]",
        )?;
        check(
            self.pool.maintenance_interval_s > 0.0,
            "pool.maintenance_interval_s",
            "must be > 0",
        )?;
        check(self.batch.n_g >= 1, "batch.N_g", "must be >= 1")?;
        check(self.batch.r > 0.0, "batch.R", "must be > 0")?;
        check(
            self.batch.votes_required >= 1,
            "batch.votes_required",
            "must be >= 1",
        )?;
        check(
            self.batch.switch_overhead_s >= 0.0,
            "batch.switch_overhead_s",
            "must be >= 0",
        )?;
        check(
            (0.0..=1.0).contains(&self.learning.r),
            "learning.r",
            "must be in [0, 1]",
        )?;
        check(
            (0.0..1.0).contains(&self.learning.holdout_frac),
            "learning.holdout_frac",
            "must be in [0, 1)",
        )?;
        check(
            (0.0..=1.0).contains(&self.objective.beta),
            "objective.beta",
            "must be in [0, 1]",
        )?;
        if self.learning.alg != Algorithm::NL {
            check(
                self.dataset.is_some(),
                "dataset",
                "required when learning.Alg is AL, PL, or HL",
            )?;
        } else {
            check(
                self.budget.max_labels.is_some()
                    || self.budget.max_tasks.is_some()
                    || (self.budget.max_batches.is_some() && !self.batch.single_batch),
                "budget",
                "Alg = NL needs max_labels, max_tasks, or max_batches",
            )?;
        }
        if let PopulationConfig::Synthetic { count, .. } = &self.population {
            check(*count >= 1, "population.count", "must be >= 1")?;
        }
        Ok(())
    }

    /// Materialize the worker population this config describes.
    pub fn build_population(&self) -> Result<WorkerPopulation> {
        match &self.population {
            PopulationConfig::Synthetic { count, seed, spec } => {
                WorkerPopulation::synthesize(spec, *count, *seed)
            }
            PopulationConfig::Trace { path } => {
                let file = File::open(path).map_err(|e| Error::Output {
                    path: path.clone(),
                    source: e,
                })?;
                WorkerPopulation::from_trace_reader(BufReader::new(file))
            }
        }
    }

    pub fn build_dataset(&self) -> Result<Option<Dataset>> {
        match &self.dataset {
            None => Ok(None),
            Some(DatasetConfig::Generated { params }) => {
                Ok(Some(dataset::generate_dataset(params)?))
            }
            Some(DatasetConfig::Csv { path }) => {
                let file = File::open(path).map_err(|e| Error::Output {
                    path: path.clone(),
                    source: e,
                })?;
                Ok(Some(Dataset::from_csv_reader(BufReader::new(file))?))
            }
        }
    }

    /// Lower the config into engine parameters.
    pub fn to_params(&self) -> ExperimentParams {
        let threshold_s = self.pool.pm_ell.is_finite().then_some(self.pool.pm_ell);
        // The reserve serves maintenance; without a threshold nobody is ever
        // evicted and recruiting one would be dead cost.
        let watermark = if threshold_s.is_some() {
            ((self.pool.reserve_watermark_frac * self.pool.n_p as f64).ceil() as usize)
                .min(self.pool.n_p.max(1))
        } else {
            0
        };
        let points_per_batch = crate::engine::planned_batch_size(self.pool.n_p, self.batch.r)
            * self.batch.n_g as usize;
        let active_weight = self
            .learning
            .active_weight
            .unwrap_or(match self.learning.alg {
                Algorithm::HL => self.learning.r,
                _ => 1.0,
            });
        ExperimentParams {
            seed: self.seed,
            pool_size: self.pool.n_p,
            records_per_task: self.batch.n_g,
            ratio: self.batch.r,
            mitigate: self.batch.sm,
            policy: self.batch.routing,
            votes_required: self.batch.votes_required,
            switch_overhead_s: self.batch.switch_overhead_s,
            latency_floor_s: self.batch.latency_floor_s,
            pool_cfg: PoolConfig {
                threshold_s,
                smoothing: self.pool.alpha,
                significance_level: self.pool.significance_level,
                min_observations: self.pool.min_observations,
                termination_estimate: self.pool.termination_estimate,
                reserve_watermark: watermark,
                recruitment_lead_time_s: self.pool.recruitment_lead_time_s,
            },
            maintenance_interval_s: self.pool.maintenance_interval_s,
            prewarm_reserve: self.pool.prewarm_reserve,
            rates: CostRates {
                wait_per_minute: self.rates.wait_per_minute,
                work_per_record: self.rates.work_per_record,
                recruit_fee: self.rates.recruit_fee,
                terminated_pay: self.rates.terminated_pay,
            },
            alg: self.learning.alg,
            active_fraction: self.learning.r,
            retrain: RetrainConfig {
                params: TrainParams {
                    l2: self.learning.l2,
                    learning_rate: self.learning.learning_rate,
                    epochs: self.learning.epochs,
                },
                base_latency_s: self.learning.decision_latency_base_s,
                per_label_latency_s: self.learning.decision_latency_per_label_s,
                active_weight,
                candidate_sample_size: self.learning.candidate_sample_size,
                frontier_size: (points_per_batch * 4).clamp(50, 2000),
            },
            holdout_frac: self.learning.holdout_frac,
            budget: Budget {
                max_labels: self.budget.max_labels,
                max_tasks: self.budget.max_tasks,
                max_batches: self.budget.max_batches,
                accuracy_target: self.budget.accuracy_target,
            },
            beta: self.objective.beta,
            single_batch: self.batch.single_batch,
            initial_worker_delay_s: self.batch.initial_worker_delay_s,
            initial_pool: None,
        }
    }
}
