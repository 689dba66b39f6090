//! Task lifecycle and straggler-mitigation routing.
//!
//! A batch is a set of tasks, each needing `votes_required` independent
//! answers. Available workers are routed to vote-hungry tasks first; with
//! mitigation enabled, leftover workers duplicate in-flight tasks and the
//! first completed assignment wins. Quality-controlled tasks (k >= 2) accept
//! at most one concurrent duplicate beyond the assignments still needed for
//! quorum, so redundancy for speed never multiplies redundancy for quality.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How mitigation picks among duplicate-eligible tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RoutingPolicy {
    #[default]
    Random,
    LongestRunning,
    FewestActive,
    /// Picks the task that will finish last; only meaningful in simulation,
    /// where sampled finish times are known ahead of time.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Unassigned,
    Active,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentStatus {
    Running,
    Finished,
    Terminated,
}

/// One worker's running or ended attempt at a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub assignment_id: u64,
    pub task_id: u64,
    pub slot_id: u64,
    pub worker_uid: u64,
    pub started_at_s: f64,
    /// Sampled latency this assignment would take if allowed to finish.
    pub due_latency_s: f64,
    pub status: AssignmentStatus,
    pub ended_at_s: Option<f64>,
}

/// A credited answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub worker_uid: u64,
    pub slot_id: u64,
    /// One label per record in the task.
    pub labels: Vec<u32>,
    pub latency_s: f64,
    pub finish_time_s: f64,
}

/// A live assignment as seen from the task (for routing decisions).
#[derive(Debug, Clone, Copy, PartialEq)]
struct LiveAssignment {
    assignment_id: u64,
    worker_uid: u64,
    started_at_s: f64,
    finish_at_s: f64,
}

/// A labeling task over a group of records.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub task_id: u64,
    /// Record (point) ids labeled by this task.
    pub records: Vec<u64>,
    pub votes_required: u32,
    answers: Vec<Answer>,
    live: Vec<LiveAssignment>,
    voted_workers: BTreeSet<u64>,
    pub dispatched_at_s: Option<f64>,
    pub completed_at_s: Option<f64>,
}

/// Result of crediting a completion against a task.
#[derive(Debug, Clone, PartialEq)]
pub enum QuorumStep {
    /// The task already had its quorum; the completion is logged and ignored.
    AlreadyComplete,
    /// Answer credited; `complete` marks the quorum-reaching vote.
    Credited { votes: u32, complete: bool },
}

impl Task {
    pub fn new(task_id: u64, records: Vec<u64>, votes_required: u32) -> Self {
        Self {
            task_id,
            records,
            votes_required: votes_required.max(1),
            answers: Vec::new(),
            live: Vec::new(),
            voted_workers: BTreeSet::new(),
            dispatched_at_s: None,
            completed_at_s: None,
        }
    }

    pub fn state(&self) -> TaskState {
        if self.is_complete() {
            TaskState::Complete
        } else if self.live.is_empty() {
            TaskState::Unassigned
        } else {
            TaskState::Active
        }
    }

    pub fn is_complete(&self) -> bool {
        self.answers.len() as u32 >= self.votes_required
    }

    pub fn votes(&self) -> u32 {
        self.answers.len() as u32
    }

    pub fn answers(&self) -> &[Answer] {
        &self.answers
    }

    pub fn live_count(&self) -> usize {
        self.live.len()
    }

    pub fn live_assignment_ids(&self) -> Vec<u64> {
        self.live.iter().map(|l| l.assignment_id).collect()
    }

    /// Needs more base assignments: votes plus live coverage short of quorum.
    pub fn vote_hungry(&self) -> bool {
        !self.is_complete()
            && (self.votes() as usize + self.live.len()) < self.votes_required as usize
    }

    /// Maximum concurrent assignments allowed. First-answer-wins tasks
    /// (k = 1) have no cap; quality-controlled tasks allow the assignments
    /// still needed for quorum plus a single mitigation duplicate.
    fn live_cap(&self) -> usize {
        if self.votes_required == 1 {
            usize::MAX
        } else {
            (self.votes_required - self.votes()) as usize + 1
        }
    }

    /// Whether mitigation may add a duplicate assignment right now.
    pub fn duplicate_eligible(&self) -> bool {
        !self.is_complete() && !self.vote_hungry() && self.live.len() < self.live_cap()
    }

    /// Whether `worker_uid` may take an assignment on this task at all.
    pub fn worker_eligible(&self, worker_uid: u64) -> bool {
        !self.voted_workers.contains(&worker_uid)
            && self.live.iter().all(|l| l.worker_uid != worker_uid)
    }

    pub fn assignment_started(
        &mut self,
        assignment_id: u64,
        worker_uid: u64,
        started_at_s: f64,
        finish_at_s: f64,
    ) {
        debug_assert!(
            self.worker_eligible(worker_uid),
            "duplicate live worker on task"
        );
        self.live.push(LiveAssignment {
            assignment_id,
            worker_uid,
            started_at_s,
            finish_at_s,
        });
    }

    fn drop_live(&mut self, assignment_id: u64) -> Option<LiveAssignment> {
        let idx = self
            .live
            .iter()
            .position(|l| l.assignment_id == assignment_id)?;
        Some(self.live.remove(idx))
    }

    /// Remove a terminated assignment from the live set.
    pub fn assignment_terminated(&mut self, assignment_id: u64) {
        self.drop_live(assignment_id);
    }

    /// Credit a finished assignment as a vote (at most one per worker); the
    /// quorum-reaching vote completes the task.
    pub fn vote_quorum_step(&mut self, assignment_id: u64, answer: Answer) -> QuorumStep {
        if self.is_complete() {
            return QuorumStep::AlreadyComplete;
        }
        self.drop_live(assignment_id);
        if self.voted_workers.contains(&answer.worker_uid) {
            // A worker's second finish on the same task carries no new vote.
            return QuorumStep::AlreadyComplete;
        }
        self.voted_workers.insert(answer.worker_uid);
        let finish_time = answer.finish_time_s;
        self.answers.push(answer);
        let complete = self.is_complete();
        if complete {
            self.completed_at_s = Some(finish_time);
        }
        QuorumStep::Credited {
            votes: self.votes(),
            complete,
        }
    }

    /// Earliest scheduled finish among live assignments: the moment the task
    /// would next produce an answer.
    pub fn next_finish_at(&self) -> Option<f64> {
        self.live
            .iter()
            .map(|l| l.finish_at_s)
            .min_by(|a, b| a.total_cmp(b))
    }

    fn earliest_live_start(&self) -> Option<f64> {
        self.live
            .iter()
            .map(|l| l.started_at_s)
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// Pick a task for an available worker.
///
/// Vote-hungry tasks take absolute priority (lowest task id first). With
/// mitigation enabled, a duplicate-eligible task is chosen by policy;
/// otherwise the worker idles.
pub fn route_available(
    worker_uid: u64,
    tasks: &[Task],
    policy: RoutingPolicy,
    mitigate: bool,
    now_s: f64,
    rng: &mut impl Rng,
) -> Option<usize> {
    if let Some(idx) = tasks
        .iter()
        .position(|t| t.vote_hungry() && t.worker_eligible(worker_uid))
    {
        return Some(idx);
    }
    if !mitigate {
        return None;
    }
    let candidates: Vec<usize> = tasks
        .iter()
        .enumerate()
        .filter(|(_, t)| t.duplicate_eligible() && t.worker_eligible(worker_uid))
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let chosen = match policy {
        RoutingPolicy::Random => candidates[rng.gen_range(0..candidates.len())],
        RoutingPolicy::LongestRunning => candidates
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let run_a = now_s - tasks[a].earliest_live_start().unwrap_or(now_s);
                let run_b = now_s - tasks[b].earliest_live_start().unwrap_or(now_s);
                run_a.total_cmp(&run_b).then(b.cmp(&a))
            })
            .unwrap(),
        RoutingPolicy::FewestActive => {
            let min_live = candidates
                .iter()
                .map(|&i| tasks[i].live_count())
                .min()
                .unwrap();
            let tied: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&i| tasks[i].live_count() == min_live)
                .collect();
            tied[rng.gen_range(0..tied.len())]
        }
        RoutingPolicy::Oracle => candidates
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let fin_a = tasks[a].next_finish_at().unwrap_or(f64::NEG_INFINITY);
                let fin_b = tasks[b].next_finish_at().unwrap_or(f64::NEG_INFINITY);
                fin_a.total_cmp(&fin_b).then(b.cmp(&a))
            })
            .unwrap(),
    };
    Some(chosen)
}

/// Per-record majority over a complete task's answers; ties go to the label
/// of the earliest-received tied answer.
pub fn majority_label(task: &Task) -> Result<Vec<u32>> {
    if !task.is_complete() {
        return Err(Error::TaskIncomplete(task.task_id));
    }
    let n_records = task.records.len();
    let mut labels = Vec::with_capacity(n_records);
    for r in 0..n_records {
        let mut counts: Vec<(u32, usize)> = Vec::new(); // (label, count)
        for answer in &task.answers {
            let label = answer.labels[r];
            match counts.iter_mut().find(|(l, _)| *l == label) {
                Some((_, c)) => *c += 1,
                None => counts.push((label, 1)),
            }
        }
        let best = counts.iter().map(|(_, c)| *c).max().unwrap();
        // Answers are stored in receipt order; the first answer holding a
        // maximal label settles ties.
        let winner = task
            .answers
            .iter()
            .map(|a| a.labels[r])
            .find(|label| counts.iter().any(|(l, c)| l == label && *c == best))
            .unwrap();
        labels.push(winner);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worker::stream_rng;

    fn answer(worker_uid: u64, labels: Vec<u32>, finish: f64) -> Answer {
        Answer {
            worker_uid,
            slot_id: worker_uid,
            labels,
            latency_s: finish,
            finish_time_s: finish,
        }
    }

    #[test]
    fn unassigned_task_has_priority_over_policy() {
        let mut tasks = vec![Task::new(0, vec![0], 1), Task::new(1, vec![1], 1)];
        tasks[0].assignment_started(0, 10, 0.0, 50.0);
        let mut rng = stream_rng(1, &[1]);
        for policy in [
            RoutingPolicy::Random,
            RoutingPolicy::LongestRunning,
            RoutingPolicy::FewestActive,
            RoutingPolicy::Oracle,
        ] {
            let choice = route_available(99, &tasks, policy, true, 5.0, &mut rng);
            assert_eq!(choice, Some(1), "{policy:?}");
        }
    }

    #[test]
    fn fewest_active_picks_among_tied_minimum() {
        let mut tasks = vec![
            Task::new(0, vec![0], 1),
            Task::new(1, vec![1], 1),
            Task::new(2, vec![2], 1),
        ];
        tasks[0].assignment_started(0, 10, 0.0, 90.0);
        tasks[0].assignment_started(1, 11, 0.0, 95.0);
        tasks[1].assignment_started(2, 12, 0.0, 80.0);
        tasks[2].assignment_started(3, 13, 0.0, 70.0);
        let mut rng = stream_rng(2, &[2]);
        for _ in 0..20 {
            let choice =
                route_available(99, &tasks, RoutingPolicy::FewestActive, true, 5.0, &mut rng)
                    .unwrap();
            assert!(choice == 1 || choice == 2);
        }
    }

    #[test]
    fn oracle_picks_latest_finisher() {
        let mut tasks = vec![Task::new(0, vec![0], 1), Task::new(1, vec![1], 1)];
        tasks[0].assignment_started(0, 10, 0.0, 50.0);
        tasks[1].assignment_started(1, 11, 0.0, 90.0);
        let mut rng = stream_rng(3, &[3]);
        let choice = route_available(99, &tasks, RoutingPolicy::Oracle, true, 5.0, &mut rng);
        assert_eq!(choice, Some(1));
    }

    #[test]
    fn longest_running_picks_earliest_start() {
        let mut tasks = vec![Task::new(0, vec![0], 1), Task::new(1, vec![1], 1)];
        tasks[0].assignment_started(0, 10, 2.0, 50.0);
        tasks[1].assignment_started(1, 11, 0.0, 40.0);
        let mut rng = stream_rng(4, &[4]);
        let choice = route_available(
            99,
            &tasks,
            RoutingPolicy::LongestRunning,
            true,
            5.0,
            &mut rng,
        );
        assert_eq!(choice, Some(1));
    }

    #[test]
    fn no_mitigation_idles_once_covered() {
        let mut tasks = vec![Task::new(0, vec![0], 1)];
        tasks[0].assignment_started(0, 10, 0.0, 50.0);
        let mut rng = stream_rng(5, &[5]);
        assert_eq!(
            route_available(99, &tasks, RoutingPolicy::Random, false, 5.0, &mut rng),
            None
        );
    }

    #[test]
    fn worker_never_doubles_up_on_a_task() {
        let mut tasks = vec![Task::new(0, vec![0], 1)];
        tasks[0].assignment_started(0, 10, 0.0, 50.0);
        let mut rng = stream_rng(6, &[6]);
        assert_eq!(
            route_available(10, &tasks, RoutingPolicy::Random, true, 5.0, &mut rng),
            None
        );
        assert_eq!(
            route_available(11, &tasks, RoutingPolicy::Random, true, 5.0, &mut rng),
            Some(0)
        );
    }

    #[test]
    fn quorum_budget_allows_single_duplicate() {
        // k=3 with 2 votes and one live assignment: exactly one duplicate fits.
        let mut task = Task::new(0, vec![0], 3);
        task.assignment_started(0, 1, 0.0, 100.0);
        task.assignment_started(1, 2, 0.0, 90.0);
        task.assignment_started(2, 3, 0.0, 80.0);
        assert!(!task.vote_hungry());
        assert!(task.duplicate_eligible()); // cap is (3-0)+1 = 4
        task.vote_quorum_step(2, answer(3, vec![1], 80.0));
        task.vote_quorum_step(1, answer(2, vec![1], 90.0));
        assert_eq!(task.votes(), 2);
        assert_eq!(task.live_count(), 1);
        assert!(task.duplicate_eligible()); // cap is (3-2)+1 = 2, live is 1
        task.assignment_started(3, 4, 95.0, 130.0);
        assert!(!task.duplicate_eligible()); // budget spent
    }

    #[test]
    fn quorum_completion_and_late_answers() {
        let mut task = Task::new(0, vec![0], 1);
        task.assignment_started(0, 1, 0.0, 60.0);
        task.assignment_started(1, 2, 0.0, 70.0);
        let step = task.vote_quorum_step(0, answer(1, vec![0], 60.0));
        assert_eq!(
            step,
            QuorumStep::Credited {
                votes: 1,
                complete: true
            }
        );
        assert_eq!(task.completed_at_s, Some(60.0));
        let late = task.vote_quorum_step(1, answer(2, vec![0], 70.0));
        assert_eq!(late, QuorumStep::AlreadyComplete);
        assert_eq!(task.votes(), 1);
    }

    #[test]
    fn majority_vote_cases() {
        let mut task = Task::new(0, vec![0], 3);
        for (i, label) in [0u32, 0, 1].iter().enumerate() {
            let uid = i as u64 + 1;
            task.assignment_started(i as u64, uid, 0.0, 10.0 + i as f64);
            task.vote_quorum_step(i as u64, answer(uid, vec![*label], 10.0 + i as f64));
        }
        assert_eq!(majority_label(&task).unwrap(), vec![0]);

        let mut single = Task::new(1, vec![0], 1);
        single.assignment_started(0, 1, 0.0, 10.0);
        single.vote_quorum_step(0, answer(1, vec![1], 10.0));
        assert_eq!(majority_label(&single).unwrap(), vec![1]);

        // Tie between labels 0 and 1: earliest received answer (label 1) wins.
        let mut tied = Task::new(2, vec![0], 2);
        tied.assignment_started(0, 1, 0.0, 10.0);
        tied.assignment_started(1, 2, 0.0, 12.0);
        tied.vote_quorum_step(0, answer(1, vec![1], 10.0));
        tied.vote_quorum_step(1, answer(2, vec![0], 12.0));
        assert_eq!(majority_label(&tied).unwrap(), vec![1]);
    }

    #[test]
    fn majority_requires_completion() {
        let task = Task::new(0, vec![0], 2);
        assert!(majority_label(&task).is_err());
    }
}
