//! Straggler mitigation under redundancy-based quality control.
//!
//! A 3-vote task naively duplicated for speed would cost 6 assignments.
//! Keeping mitigation decoupled — at most one concurrent duplicate beyond
//! the votes still owed — gets the same latency cover for 4 or 5.
//!
//! ```bash
//! cargo run --example quorum_quality_control
//! ```

use std::collections::BTreeMap;

use crowdsim::engine::{run_experiment, Budget, ExperimentParams};
use crowdsim::scheduler::majority_label;
use crowdsim::scheduler::{Answer, Task};
use crowdsim::worker::{LatencyDistribution, PopulationSpec, WorkerPopulation};

fn main() -> crowdsim::Result<()> {
    let spec = PopulationSpec {
        latency: LatencyDistribution::Bimodal {
            fast_weight: 0.8,
            fast_mean_s: 30.0,
            fast_std_s: 5.0,
            slow_mean_s: 300.0,
            slow_std_s: 60.0,
        },
        sigma_ratio: 0.15,
        accuracy: 0.8,
    };
    let population = WorkerPopulation::synthesize(&spec, 500, 83)?;
    let params = ExperimentParams {
        seed: 1,
        pool_size: 15,
        records_per_task: 1,
        ratio: 1.0,
        votes_required: 3,
        mitigate: true,
        budget: Budget {
            max_tasks: Some(45),
            ..Budget::default()
        },
        ..ExperimentParams::default()
    };
    let out = run_experiment(&params, &population, None)?;

    let mut per_task: BTreeMap<u64, u64> = BTreeMap::new();
    for a in &out.assignments {
        *per_task.entry(a.task_id).or_insert(0) += 1;
    }
    let mut histogram: BTreeMap<u64, usize> = BTreeMap::new();
    for count in per_task.values() {
        *histogram.entry(*count).or_insert(0) += 1;
    }
    println!("assignments per 3-vote task (45 tasks, mitigation on):");
    for (count, tasks) in &histogram {
        println!("  {count} assignments: {tasks} tasks");
    }
    println!("naive duplication-by-pairs would spend 6 per task.");

    // Majority voting over redundant answers.
    let mut task = Task::new(0, vec![0], 3);
    for (i, label) in [1u32, 0, 1].iter().enumerate() {
        let uid = i as u64;
        task.assignment_started(i as u64, uid, 0.0, 10.0 + i as f64);
        task.vote_quorum_step(
            i as u64,
            Answer {
                worker_uid: uid,
                slot_id: uid,
                labels: vec![*label],
                latency_s: 10.0 + i as f64,
                finish_time_s: 10.0 + i as f64,
            },
        );
    }
    println!(
        "\nvotes [1, 0, 1] -> majority label {:?}",
        majority_label(&task)?
    );
    Ok(())
}
