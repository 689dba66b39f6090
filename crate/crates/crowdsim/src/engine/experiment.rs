//! Full experiment runs: batches dispatched over the retainer pool, straggler
//! mitigation, periodic maintenance, asynchronous retraining, and budget/
//! accuracy stop conditions, all driven by one deterministic event loop.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{self, active_batch_size, Dataset, LearnState, PointSource, RetrainConfig};
use crate::pool::{PoolConfig, RetainerPool};
use crate::scheduler::{
    majority_label, route_available, Answer, Assignment, AssignmentStatus, QuorumStep,
    RoutingPolicy, Task,
};
use crate::worker::{assignment_rng, stream_rng, WorkerPopulation, WorkerProfile};

use super::cost::CostRates;
use super::event::{
    AssignmentFinishEvent, BatchCompleteInfo, BatchDispatchEvent, EventPayload, EvictionRecord,
    InitialSlot, LoggedEvent, MaintenanceTickEvent, PayInfo, QuorumInfo, RecruitmentReadyEvent,
    RetrainDoneEvent, RunEndInfo, RunInfo, StartedAssignment, TerminationInfo,
};
use super::metrics::RunMetrics;
use super::queue::{EventQueue, QueueEntry};

/// Learning strategy for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Algorithm {
    /// Uncertainty sampling for the whole round.
    AL,
    /// Random selection for the whole round.
    PL,
    /// Active/passive split of each round.
    HL,
    /// No learning; tasks label a plain record stream.
    #[default]
    NL,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Budget {
    pub max_labels: Option<u64>,
    pub max_tasks: Option<u64>,
    pub max_batches: Option<u64>,
    pub accuracy_target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentParams {
    pub seed: u64,
    /// Retainer pool size.
    pub pool_size: usize,
    /// Records grouped into one task.
    pub records_per_task: u32,
    /// Pool-to-batch ratio; batch size is `round(pool_size / ratio)`.
    pub ratio: f64,
    /// Straggler mitigation on/off.
    pub mitigate: bool,
    pub policy: RoutingPolicy,
    pub votes_required: u32,
    /// Context-switch delay after an assignment is terminated.
    pub switch_overhead_s: f64,
    pub latency_floor_s: f64,
    pub pool_cfg: PoolConfig,
    pub maintenance_interval_s: f64,
    pub prewarm_reserve: bool,
    pub rates: CostRates,
    pub alg: Algorithm,
    /// Fraction of each round selected actively under HL.
    pub active_fraction: f64,
    pub retrain: RetrainConfig,
    pub holdout_frac: f64,
    pub budget: Budget,
    pub beta: f64,
    /// Run everything as one batch (no-retainer baseline shape).
    pub single_batch: bool,
    /// Workers only become available after this delay (models recruiting a
    /// workforce from scratch instead of holding a warm pool).
    pub initial_worker_delay_s: f64,
    /// Exact initial pool, overriding recruitment draws.
    pub initial_pool: Option<Vec<WorkerProfile>>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            seed: 0,
            pool_size: 15,
            records_per_task: 1,
            ratio: 1.0,
            mitigate: true,
            policy: RoutingPolicy::Random,
            votes_required: 1,
            switch_overhead_s: 2.0,
            latency_floor_s: 0.1,
            pool_cfg: PoolConfig::default(),
            maintenance_interval_s: 60.0,
            prewarm_reserve: true,
            rates: CostRates::default(),
            alg: Algorithm::NL,
            active_fraction: 0.5,
            retrain: RetrainConfig::default(),
            holdout_frac: 0.2,
            budget: Budget::default(),
            beta: 0.5,
            single_batch: false,
            initial_worker_delay_s: 0.0,
            initial_pool: None,
        }
    }
}

impl ExperimentParams {
    fn validate(&self) -> Result<()> {
        if self.pool_size == 0 {
            return Err(Error::invalid("pool_size", "must be >= 1"));
        }
        if self.records_per_task == 0 {
            return Err(Error::invalid("records_per_task", "must be >= 1"));
        }
        if !(self.ratio > 0.0) {
            return Err(Error::invalid("ratio", "must be > 0"));
        }
        if self.votes_required == 0 {
            return Err(Error::invalid("votes_required", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid("beta", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.active_fraction) {
            return Err(Error::invalid("active_fraction", "must be in [0, 1]"));
        }
        let b = &self.budget;
        if self.alg == Algorithm::NL
            && b.max_labels.is_none()
            && b.max_tasks.is_none()
            && (b.max_batches.is_none() || self.single_batch)
        {
            return Err(Error::invalid(
                "budget",
                "a label or task budget is required without a dataset to exhaust",
            ));
        }
        Ok(())
    }
}

/// Number of tasks per batch for a pool size and pool-to-batch ratio.
pub fn planned_batch_size(pool_size: usize, ratio: f64) -> usize {
    ((pool_size as f64 / ratio).round() as usize).max(1)
}

/// A finished run: the replayable event stream plus metrics folded from it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub events: Vec<LoggedEvent>,
    pub assignments: Vec<Assignment>,
}

struct WorkerRuntime {
    worker_uid: u64,
    slot_id: u64,
    profile: WorkerProfile,
    busy: Option<u64>,
    cooling_until_s: f64,
    idle_since_s: f64,
    attempts: BTreeMap<u64, u32>,
}

struct LearnContext {
    state: LearnState,
    train_ids: Vec<u64>,
    holdout_ids: Vec<u64>,
    latest_accuracy: Option<f64>,
    pending_sources: BTreeMap<u64, PointSource>,
}

struct Sim<'a> {
    p: &'a ExperimentParams,
    population: &'a WorkerPopulation,
    dataset: Option<&'a Dataset>,
    queue: EventQueue,
    out: Vec<LoggedEvent>,
    next_log_seq: u64,
    pool: RetainerPool,
    workers: BTreeMap<u64, WorkerRuntime>,
    tasks: Vec<Task>,
    assignments: Vec<Assignment>,
    assignment_labels: Vec<Vec<u32>>,
    batch_open: bool,
    batch_dispatch_time_s: f64,
    batches_started: u64,
    tasks_dispatched: u64,
    labels_total: u64,
    next_task_id: u64,
    next_record_id: u64,
    learn: Option<LearnContext>,
    route_rng: ChaCha8Rng,
    select_rng: ChaCha8Rng,
    recruit_rng: ChaCha8Rng,
    done: bool,
}

impl<'a> Sim<'a> {
    fn new(
        p: &'a ExperimentParams,
        population: &'a WorkerPopulation,
        dataset: Option<&'a Dataset>,
    ) -> Result<Self> {
        p.validate()?;
        if p.alg != Algorithm::NL && dataset.is_none() {
            return Err(Error::invalid("dataset", "learning runs need a dataset"));
        }
        let learn = match (p.alg, dataset) {
            (Algorithm::NL, _) => None,
            (_, Some(ds)) => {
                let (train_ids, holdout_ids) = ds.holdout_split(p.holdout_frac, p.seed);
                if holdout_ids.is_empty() {
                    return Err(Error::invalid(
                        "holdout_frac",
                        "holdout must contain at least one point",
                    ));
                }
                Some(LearnContext {
                    state: LearnState::new(),
                    train_ids,
                    holdout_ids,
                    latest_accuracy: None,
                    pending_sources: BTreeMap::new(),
                })
            }
            _ => unreachable!(),
        };
        Ok(Self {
            p,
            population,
            dataset,
            queue: EventQueue::new(),
            out: Vec::new(),
            next_log_seq: 0,
            pool: RetainerPool::new(p.pool_cfg.clone()),
            workers: BTreeMap::new(),
            tasks: Vec::new(),
            assignments: Vec::new(),
            assignment_labels: Vec::new(),
            batch_open: false,
            batch_dispatch_time_s: 0.0,
            batches_started: 0,
            tasks_dispatched: 0,
            labels_total: 0,
            next_task_id: 0,
            next_record_id: 0,
            learn,
            route_rng: stream_rng(p.seed, &[101]),
            select_rng: stream_rng(p.seed, &[102]),
            recruit_rng: stream_rng(p.seed, &[103]),
            done: false,
        })
    }

    fn log(&mut self, time_s: f64, payload: EventPayload) {
        let sequence = self.next_log_seq;
        self.next_log_seq += 1;
        self.out.push(LoggedEvent {
            time_s,
            sequence,
            payload,
        });
    }

    fn stop_reason(&self) -> Option<&'static str> {
        let b = &self.p.budget;
        if let (Some(target), Some(learn)) = (b.accuracy_target, self.learn.as_ref()) {
            if learn.latest_accuracy.is_some_and(|a| a >= target) {
                return Some("accuracy_target");
            }
        }
        if b.max_labels.is_some_and(|m| self.labels_total >= m) {
            return Some("label_budget");
        }
        if b.max_tasks.is_some_and(|m| self.tasks_dispatched >= m) {
            return Some("task_budget");
        }
        if b.max_batches.is_some_and(|m| self.batches_started >= m) {
            return Some("batch_budget");
        }
        None
    }

    fn bootstrap(&mut self) {
        if let Some(reason) = self.stop_reason() {
            self.finish_run(0.0, reason);
            return;
        }
        let profiles: Vec<WorkerProfile> = match &self.p.initial_pool {
            Some(pool) => pool.clone(),
            None => (0..self.p.pool_size)
                .map(|_| self.population.draw(&mut self.recruit_rng).clone())
                .collect(),
        };
        let mut initial_slots = Vec::new();
        let mut worker_ids = Vec::new();
        for profile in profiles {
            worker_ids.push(profile.id.clone());
            let slot_id = self.pool.admit(profile, 0.0);
            let slot = self.pool.slot(slot_id).unwrap();
            initial_slots.push(InitialSlot {
                slot_id,
                worker_uid: slot.worker_uid,
                worker_id: slot.profile.id.clone(),
            });
            self.workers.insert(
                slot.worker_uid,
                WorkerRuntime {
                    worker_uid: slot.worker_uid,
                    slot_id,
                    profile: slot.profile.clone(),
                    busy: None,
                    cooling_until_s: self.p.initial_worker_delay_s,
                    idle_since_s: self.p.initial_worker_delay_s,
                    attempts: BTreeMap::new(),
                },
            );
        }
        let mut recruited = initial_slots.len();
        if self.p.prewarm_reserve && self.p.pool_cfg.reserve_watermark > 0 {
            let n = self.p.pool_cfg.reserve_watermark;
            let drawn = self
                .pool
                .recruit_to_reserve(self.population, n, &mut self.recruit_rng);
            for p in &drawn {
                worker_ids.push(p.id.clone());
            }
            recruited += drawn.len();
            self.pool.reserve_ready(drawn);
        }
        self.log(
            0.0,
            EventPayload::RecruitmentReady(RecruitmentReadyEvent {
                worker_ids,
                recruit_pay: recruited as f64 * self.p.rates.recruit_fee,
                prewarm: true,
                initial_pool: Some(initial_slots),
                run_info: Some(RunInfo {
                    seed: self.p.seed,
                    beta: self.p.beta,
                    records_per_task: self.p.records_per_task,
                }),
            }),
        );
        if self.p.pool_cfg.threshold_s.is_some() {
            self.queue
                .schedule(self.p.maintenance_interval_s, QueueEntry::MaintenanceTick);
        }
        if self.p.initial_worker_delay_s > 0.0 {
            let uids: Vec<u64> = self.workers.keys().copied().collect();
            for uid in uids {
                self.queue.schedule(
                    self.p.initial_worker_delay_s,
                    QueueEntry::WorkerFree { worker_uid: uid },
                );
            }
        }
        self.queue.schedule(0.0, QueueEntry::BatchStart);
    }

    /// Points still eligible for selection: in the training split, not
    /// cached, and not already requested in an in-flight task.
    fn selectable(&self) -> Vec<u64> {
        let learn = self.learn.as_ref().expect("learning context");
        learn
            .train_ids
            .iter()
            .copied()
            .filter(|id| !learn.state.is_cached(*id) && !learn.pending_sources.contains_key(id))
            .collect()
    }

    fn handle_batch_start(&mut self, now: f64) {
        if self.done {
            return;
        }
        if let Some(reason) = self.stop_reason() {
            self.finish_run(now, reason);
            return;
        }
        let planned = if self.p.single_batch {
            usize::MAX
        } else {
            planned_batch_size(self.p.pool_size, self.p.ratio)
        };
        let n_g = self.p.records_per_task as usize;
        let mut cap = planned;
        if let Some(max_tasks) = self.p.budget.max_tasks {
            cap = cap.min((max_tasks - self.tasks_dispatched) as usize);
        }
        if let Some(max_labels) = self.p.budget.max_labels {
            let remaining = (max_labels - self.labels_total) as usize;
            cap = cap.min(remaining.div_ceil(n_g));
        }

        let (task_records, active_points, passive_points, frontier_version) =
            if self.learn.is_none() {
                let records: Vec<Vec<u64>> = (0..cap)
                    .map(|_| {
                        let start = self.next_record_id;
                        self.next_record_id += n_g as u64;
                        (start..start + n_g as u64).collect()
                    })
                    .collect();
                (records, Vec::new(), Vec::new(), None)
            } else {
                let selectable = self.selectable();
                if selectable.is_empty() {
                    self.finish_run(now, "points_exhausted");
                    return;
                }
                let p_points = selectable.len().min(cap.saturating_mul(n_g));
                let k = match self.p.alg {
                    Algorithm::AL => p_points,
                    Algorithm::PL => 0,
                    Algorithm::HL => active_batch_size(p_points, self.p.active_fraction),
                    Algorithm::NL => unreachable!(),
                };
                let dataset = self.dataset.unwrap();
                let learn = self.learn.as_mut().unwrap();
                let frontier_version = learn.state.frontier.as_ref().map(|f| f.model_version);
                let (active, passive) = learn.state.select_round(
                    dataset,
                    &selectable,
                    k,
                    p_points,
                    &self.p.retrain,
                    &mut self.select_rng,
                );
                for id in &active {
                    learn.pending_sources.insert(*id, PointSource::Active);
                }
                for id in &passive {
                    learn.pending_sources.insert(*id, PointSource::Passive);
                }
                let points: Vec<u64> = active.iter().chain(passive.iter()).copied().collect();
                let records: Vec<Vec<u64>> = points.chunks(n_g).map(|c| c.to_vec()).collect();
                (records, active, passive, frontier_version)
            };
        if task_records.is_empty() {
            self.finish_run(now, "points_exhausted");
            return;
        }

        self.tasks.clear();
        let mut task_ids = Vec::new();
        for records in task_records {
            let task_id = self.next_task_id;
            self.next_task_id += 1;
            let mut task = Task::new(task_id, records, self.p.votes_required);
            task.dispatched_at_s = Some(now);
            task_ids.push(task_id);
            self.tasks.push(task);
        }
        self.tasks_dispatched += task_ids.len() as u64;
        self.batches_started += 1;
        self.batch_open = true;
        self.batch_dispatch_time_s = now;

        let started = self.dispatch_available(now);
        self.log(
            now,
            EventPayload::BatchDispatch(BatchDispatchEvent {
                trigger: "batch_start".into(),
                batch_index: Some(self.batches_started - 1),
                task_ids,
                active_points,
                passive_points,
                frontier_version,
                started,
                run_end: None,
            }),
        );
    }

    fn handle_worker_free(&mut self, now: f64) {
        if self.done {
            return;
        }
        let started = self.dispatch_available(now);
        if !started.is_empty() {
            self.log(
                now,
                EventPayload::BatchDispatch(BatchDispatchEvent {
                    trigger: "worker_free".into(),
                    batch_index: None,
                    task_ids: Vec::new(),
                    active_points: Vec::new(),
                    passive_points: Vec::new(),
                    frontier_version: None,
                    started,
                    run_end: None,
                }),
            );
        }
    }

    fn handle_assignment_finish(&mut self, now: f64, assignment_id: u64) -> Result<()> {
        if self.done {
            return Ok(());
        }
        if self.assignments[assignment_id as usize].status != AssignmentStatus::Running {
            // Terminated before it could finish; the scheduled event is stale.
            return Ok(());
        }
        let (task_id, slot_id, worker_uid, latency_s) = {
            let a = &mut self.assignments[assignment_id as usize];
            a.status = AssignmentStatus::Finished;
            a.ended_at_s = Some(now);
            (a.task_id, a.slot_id, a.worker_uid, a.due_latency_s)
        };
        let task_idx = self
            .tasks
            .iter()
            .position(|t| t.task_id == task_id)
            .expect("running assignment belongs to the current batch");
        let records = self.tasks[task_idx].records.len() as u32;
        let per_label = latency_s / f64::from(records);
        let work_pay = self.p.rates.work_pay(records);

        self.pool
            .slot_mut(slot_id)
            .expect("running assignment's slot is seated")
            .record_completed(per_label);
        {
            let worker = self.workers.get_mut(&worker_uid).expect("worker seated");
            worker.busy = None;
            worker.idle_since_s = now;
        }

        let answer = Answer {
            worker_uid,
            slot_id,
            labels: self.assignment_labels[assignment_id as usize].clone(),
            latency_s,
            finish_time_s: now,
        };
        let step = self.tasks[task_idx].vote_quorum_step(assignment_id, answer);
        let (credited, votes, complete) = match step {
            QuorumStep::AlreadyComplete => (false, self.tasks[task_idx].votes(), false),
            QuorumStep::Credited { votes, complete } => (true, votes, complete),
        };

        let mut terminated = Vec::new();
        let mut quorum = None;
        if complete {
            let winner_started = self.assignments[assignment_id as usize].started_at_s;
            // First pay and cut every remaining live assignment of the task.
            for live_id in self.tasks[task_idx].live_assignment_ids() {
                let info = self.terminate_assignment(live_id, now, false);
                let loser_uid = info.worker_uid;
                // Censoring evidence only counts when the loser was the
                // incumbent: the estimator's imputation assumes the
                // terminated worker started no later than its terminator.
                // A late duplicate losing its race says nothing about the
                // duplicating worker's speed.
                if self.assignments[live_id as usize].started_at_s <= winner_started {
                    self.pool
                        .slot_mut(info.slot_id)
                        .expect("live assignment's slot is seated")
                        .record_terminated(per_label);
                }
                self.tasks[task_idx].assignment_terminated(live_id);
                let cooling = now + self.p.switch_overhead_s;
                if let Some(w) = self.workers.get_mut(&loser_uid) {
                    w.busy = None;
                    w.cooling_until_s = cooling;
                    w.idle_since_s = now;
                }
                self.queue.schedule(
                    cooling,
                    QueueEntry::WorkerFree {
                        worker_uid: loser_uid,
                    },
                );
                terminated.push(info);
            }
            let labels = majority_label(&self.tasks[task_idx])?;
            let record_ids = self.tasks[task_idx].records.clone();
            let mut new_labels = 0u64;
            let pairs: Vec<(u64, u32)> = record_ids
                .iter()
                .copied()
                .zip(labels.iter().copied())
                .collect();
            match self.learn.as_mut() {
                Some(learn) => {
                    for (record, label) in &pairs {
                        let source = learn
                            .pending_sources
                            .remove(record)
                            .unwrap_or(PointSource::Passive);
                        if learn.state.commit_label(*record, *label, source) {
                            new_labels += 1;
                        }
                    }
                }
                None => new_labels = pairs.len() as u64,
            }
            self.labels_total += new_labels;
            quorum = Some(QuorumInfo {
                task_id,
                labels: pairs,
                task_latency_s: now - self.batch_dispatch_time_s,
                new_labels,
                total_labels: self.labels_total,
            });
            if let Some(learn) = self.learn.as_mut() {
                if let Some(done_at) = learn.state.maybe_start_retrain(now, &self.p.retrain) {
                    let version = learn.state.in_flight.as_ref().unwrap().version;
                    self.queue
                        .schedule(done_at, QueueEntry::RetrainDone { version });
                }
            }
        }

        let batch_complete = if self.batch_open && self.tasks.iter().all(Task::is_complete) {
            self.batch_open = false;
            let makespan = now - self.batch_dispatch_time_s;
            self.queue.schedule(now, QueueEntry::BatchStart);
            Some(BatchCompleteInfo {
                batch_index: self.batches_started - 1,
                makespan_s: makespan,
            })
        } else {
            None
        };

        let started = self.dispatch_available(now);
        self.log(
            now,
            EventPayload::AssignmentFinish(AssignmentFinishEvent {
                assignment_id,
                task_id,
                slot_id,
                worker_uid,
                batch_index: self.batches_started.saturating_sub(1),
                latency_s,
                per_label_latency_s: per_label,
                records,
                work_pay,
                credited,
                votes,
                quorum,
                terminated,
                started,
                batch_complete,
            }),
        );
        Ok(())
    }

    fn handle_maintenance_tick(&mut self, now: f64) {
        if self.done {
            return;
        }
        self.queue.schedule(
            now + self.p.maintenance_interval_s,
            QueueEntry::MaintenanceTick,
        );
        let outcome = self.pool.maintenance_step(now);
        let mut evictions = Vec::new();
        for ev in outcome.evictions {
            let mut record = EvictionRecord {
                slot_id: ev.slot_id,
                worker_uid: ev.worker_uid,
                worker_id: ev.worker_id.clone(),
                estimated_latency_s: ev.estimated_latency_s,
                replacement_slot_id: ev.replacement_slot_id,
                replacement_uid: ev.replacement_uid,
                replacement_id: ev.replacement_id.clone(),
                terminated: None,
                wait_pay: 0.0,
                idle_s: 0.0,
            };
            if let Some(runtime) = self.workers.remove(&ev.worker_uid) {
                match runtime.busy {
                    Some(aid) => {
                        let info = self.terminate_assignment(aid, now, true);
                        if let Some(task) =
                            self.tasks.iter_mut().find(|t| t.task_id == info.task_id)
                        {
                            task.assignment_terminated(aid);
                        }
                        record.terminated = Some(info);
                    }
                    None => {
                        let idle = (now - runtime.idle_since_s).max(0.0);
                        record.idle_s = idle;
                        record.wait_pay = self.p.rates.wait_pay(idle);
                    }
                }
            }
            let slot = self
                .pool
                .slot(ev.replacement_slot_id)
                .expect("replacement seated by maintenance");
            self.workers.insert(
                ev.replacement_uid,
                WorkerRuntime {
                    worker_uid: ev.replacement_uid,
                    slot_id: ev.replacement_slot_id,
                    profile: slot.profile.clone(),
                    busy: None,
                    cooling_until_s: now,
                    idle_since_s: now,
                    attempts: BTreeMap::new(),
                },
            );
            evictions.push(record);
        }
        if outcome.recruit_request > 0 {
            let drawn = self.pool.recruit_to_reserve(
                self.population,
                outcome.recruit_request,
                &mut self.recruit_rng,
            );
            self.queue.schedule(
                now + self.p.pool_cfg.recruitment_lead_time_s,
                QueueEntry::RecruitmentReady { profiles: drawn },
            );
        }
        let started = self.dispatch_available(now);
        if !evictions.is_empty() || outcome.recruit_request > 0 || !started.is_empty() {
            self.log(
                now,
                EventPayload::MaintenanceTick(MaintenanceTickEvent {
                    batch_index: self.batches_started.saturating_sub(1),
                    evictions,
                    recruits_requested: outcome.recruit_request as u64,
                    reserve_ready: self.pool.reserve_len() as u64,
                    started,
                }),
            );
        }
    }

    fn handle_recruitment_ready(&mut self, now: f64, profiles: Vec<WorkerProfile>) {
        if self.done {
            return;
        }
        let worker_ids: Vec<String> = profiles.iter().map(|p| p.id.clone()).collect();
        let recruit_pay = profiles.len() as f64 * self.p.rates.recruit_fee;
        self.pool.reserve_ready(profiles);
        self.log(
            now,
            EventPayload::RecruitmentReady(RecruitmentReadyEvent {
                worker_ids,
                recruit_pay,
                prewarm: false,
                initial_pool: None,
                run_info: None,
            }),
        );
    }

    fn handle_retrain_done(&mut self, now: f64) -> Result<()> {
        if self.done {
            return Ok(());
        }
        let selectable = self.selectable();
        let dataset = self.dataset.expect("retrains only run with a dataset");
        let learn = self.learn.as_mut().expect("learning context");
        let trained_on = learn
            .state
            .in_flight
            .as_ref()
            .expect("retrain completion matches a job")
            .snapshot
            .len() as u64;
        let version = learn.state.finish_retrain(
            dataset,
            &selectable,
            &self.p.retrain,
            &mut self.select_rng,
        )?;
        let accuracy = learning::evaluate(
            learn.state.model.as_ref().unwrap(),
            dataset,
            &learn.holdout_ids,
        )?;
        learn.latest_accuracy = Some(accuracy);
        let frontier_size = learn
            .state
            .frontier
            .as_ref()
            .map_or(0, |f| f.point_ids.len()) as u64;
        if let Some(done_at) = learn.state.maybe_start_retrain(now, &self.p.retrain) {
            let next_version = learn.state.in_flight.as_ref().unwrap().version;
            self.queue.schedule(
                done_at,
                QueueEntry::RetrainDone {
                    version: next_version,
                },
            );
        }
        self.log(
            now,
            EventPayload::RetrainDone(RetrainDoneEvent {
                model_version: version,
                trained_on,
                total_labels: self.labels_total,
                holdout_accuracy: Some(accuracy),
                frontier_size,
            }),
        );
        Ok(())
    }

    fn terminate_assignment(
        &mut self,
        assignment_id: u64,
        now: f64,
        task_returned: bool,
    ) -> TerminationInfo {
        let a = &mut self.assignments[assignment_id as usize];
        debug_assert_eq!(a.status, AssignmentStatus::Running);
        a.status = AssignmentStatus::Terminated;
        a.ended_at_s = Some(now);
        let records = self
            .tasks
            .iter()
            .find(|t| t.task_id == a.task_id)
            .map_or(self.p.records_per_task, |t| t.records.len() as u32);
        let pay = self
            .p
            .rates
            .termination_pay(records, now - a.started_at_s, a.due_latency_s);
        TerminationInfo {
            assignment_id,
            task_id: a.task_id,
            slot_id: a.slot_id,
            worker_uid: a.worker_uid,
            pay,
            task_returned,
        }
    }

    /// Route every available worker, in slot order, to its next assignment.
    fn dispatch_available(&mut self, now: f64) -> Vec<StartedAssignment> {
        let mut started = Vec::new();
        let slot_workers: Vec<u64> = self.pool.slots().iter().map(|s| s.worker_uid).collect();
        for worker_uid in slot_workers {
            let available = self
                .workers
                .get(&worker_uid)
                .is_some_and(|w| w.busy.is_none() && now >= w.cooling_until_s);
            if !available {
                continue;
            }
            let choice = route_available(
                worker_uid,
                &self.tasks,
                self.p.policy,
                self.p.mitigate,
                now,
                &mut self.route_rng,
            );
            if let Some(task_idx) = choice {
                started.push(self.start_assignment(worker_uid, task_idx, now));
            }
        }
        started
    }

    fn start_assignment(
        &mut self,
        worker_uid: u64,
        task_idx: usize,
        now: f64,
    ) -> StartedAssignment {
        let task_id = self.tasks[task_idx].task_id;
        let (slot_id, profile, attempt, idle_s) = {
            let worker = self.workers.get_mut(&worker_uid).expect("worker seated");
            let attempt = worker.attempts.entry(task_id).or_insert(0);
            let this_attempt = *attempt;
            *attempt += 1;
            (
                worker.slot_id,
                worker.profile.clone(),
                this_attempt,
                (now - worker.idle_since_s).max(0.0),
            )
        };
        let mut rng = assignment_rng(self.p.seed, worker_uid, task_id, attempt);
        let latency_s = profile.sample_latency(self.p.latency_floor_s, &mut rng);
        let labels: Vec<u32> = self.tasks[task_idx]
            .records
            .iter()
            .map(|record| {
                let (true_label, n_classes) = match self.dataset {
                    Some(ds) => (ds.true_label(*record), ds.n_classes.max(2)),
                    None => (0, 2),
                };
                if profile.sample_label_correct(&mut rng) {
                    true_label
                } else {
                    let offset = rng.gen_range(1..n_classes);
                    (true_label + offset) % n_classes
                }
            })
            .collect();

        let assignment_id = self.assignments.len() as u64;
        self.assignments.push(Assignment {
            assignment_id,
            task_id,
            slot_id,
            worker_uid,
            started_at_s: now,
            due_latency_s: latency_s,
            status: AssignmentStatus::Running,
            ended_at_s: None,
        });
        self.assignment_labels.push(labels);
        self.tasks[task_idx].assignment_started(assignment_id, worker_uid, now, now + latency_s);
        self.queue.schedule(
            now + latency_s,
            QueueEntry::AssignmentFinish { assignment_id },
        );
        let wait_pay = self.p.rates.wait_pay(idle_s);
        let worker = self.workers.get_mut(&worker_uid).unwrap();
        worker.busy = Some(assignment_id);
        StartedAssignment {
            assignment_id,
            task_id,
            slot_id,
            worker_uid,
            idle_s,
            wait_pay,
        }
    }

    fn finish_run(&mut self, now: f64, reason: &str) {
        let mut wait_pay = Vec::new();
        for slot in self.pool.slots() {
            if let Some(w) = self.workers.get(&slot.worker_uid) {
                if w.busy.is_none() {
                    let idle = (now - w.idle_since_s).max(0.0);
                    let amount = self.p.rates.wait_pay(idle);
                    if amount > 0.0 {
                        wait_pay.push(PayInfo {
                            slot_id: w.slot_id,
                            worker_uid: w.worker_uid,
                            amount,
                        });
                    }
                }
            }
        }
        let final_accuracy = self.final_accuracy();
        self.log(
            now,
            EventPayload::BatchDispatch(BatchDispatchEvent {
                trigger: "run_end".into(),
                batch_index: None,
                task_ids: Vec::new(),
                active_points: Vec::new(),
                passive_points: Vec::new(),
                frontier_version: None,
                started: Vec::new(),
                run_end: Some(RunEndInfo {
                    reason: reason.to_string(),
                    wait_pay,
                    final_accuracy,
                    final_labels: self.labels_total,
                }),
            }),
        );
        self.done = true;
    }

    /// Accuracy of a model trained on every collected label; gives the
    /// learning curve its endpoint even when a retrain was still in flight.
    fn final_accuracy(&mut self) -> Option<f64> {
        let dataset = self.dataset?;
        let learn = self.learn.as_mut()?;
        if learn.state.labeled_count() == 0 {
            return None;
        }
        let ids: Vec<u64> = learn.state.labeled().keys().copied().collect();
        let features: Vec<&[f64]> = ids.iter().map(|id| dataset.point(*id)).collect();
        let labels: Vec<u32> = ids.iter().map(|id| learn.state.labeled()[id]).collect();
        let weights = vec![1.0; ids.len()];
        let model = learning::classifier::train(
            &self.p.retrain.params,
            &features,
            &labels,
            &weights,
            dataset.n_classes as usize,
        )
        .ok()?;
        learning::evaluate(&model, dataset, &learn.holdout_ids).ok()
    }

    fn run(mut self) -> Result<RunOutput> {
        self.bootstrap();
        while let Some((time, entry)) = self.queue.pop() {
            match entry {
                QueueEntry::AssignmentFinish { assignment_id } => {
                    self.handle_assignment_finish(time, assignment_id)?;
                }
                QueueEntry::RecruitmentReady { profiles } => {
                    self.handle_recruitment_ready(time, profiles);
                }
                QueueEntry::RetrainDone { .. } => self.handle_retrain_done(time)?,
                QueueEntry::MaintenanceTick => self.handle_maintenance_tick(time),
                QueueEntry::BatchStart => self.handle_batch_start(time),
                QueueEntry::WorkerFree { .. } => self.handle_worker_free(time),
            }
            if self.done && self.queue.is_empty() {
                break;
            }
        }
        let metrics = RunMetrics::from_events(&self.out);
        Ok(RunOutput {
            metrics,
            events: self.out,
            assignments: self.assignments,
        })
    }
}

/// Execute a configured experiment run.
pub fn run_experiment(
    params: &ExperimentParams,
    population: &WorkerPopulation,
    dataset: Option<&Dataset>,
) -> Result<RunOutput> {
    Sim::new(params, population, dataset)?.run()
}

/// Convenience wrapper: run one batch of `n_tasks` plain labeling tasks over
/// an exact pool of workers.
pub fn run_single_batch(
    pool: Vec<WorkerProfile>,
    n_tasks: u64,
    params: &ExperimentParams,
) -> Result<RunOutput> {
    if n_tasks == 0 {
        return Err(Error::EmptyBatch);
    }
    let population = WorkerPopulation::new(pool.clone(), params.seed)?;
    let params = ExperimentParams {
        pool_size: pool.len(),
        initial_pool: Some(pool),
        alg: Algorithm::NL,
        budget: Budget {
            max_tasks: Some(n_tasks),
            max_batches: Some(1),
            ..Budget::default()
        },
        single_batch: true,
        pool_cfg: PoolConfig {
            threshold_s: None,
            ..params.pool_cfg.clone()
        },
        ..params.clone()
    };
    run_experiment(&params, &population, None)
}
