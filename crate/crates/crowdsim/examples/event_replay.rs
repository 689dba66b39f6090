//! Determinism and event-log replay.
//!
//! Every run logs its effects as `time,sequence,kind,payload` lines; metrics
//! and the cost ledger are pure folds over that stream, so a persisted log
//! replays to byte-identical results.
//!
//! ```bash
//! cargo run --example event_replay
//! ```

use crowdsim::engine::{
    read_event_log, run_experiment, write_event_log, Budget, CostLedger, ExperimentParams,
    RunMetrics,
};
use crowdsim::worker::{LatencyDistribution, PopulationSpec, WorkerPopulation};

fn main() -> crowdsim::Result<()> {
    let spec = PopulationSpec {
        latency: LatencyDistribution::LogNormal {
            location: 20.0f64.ln(),
            scale: 0.6,
        },
        sigma_ratio: 0.3,
        accuracy: 1.0,
    };
    let population = WorkerPopulation::synthesize(&spec, 100, 5)?;
    let params = ExperimentParams {
        seed: 1234,
        pool_size: 8,
        records_per_task: 2,
        mitigate: true,
        budget: Budget {
            max_tasks: Some(40),
            ..Budget::default()
        },
        ..ExperimentParams::default()
    };

    let first = run_experiment(&params, &population, None)?;
    let second = run_experiment(&params, &population, None)?;
    println!("same seed, two runs:");
    println!(
        "  events               : {} / {}",
        first.events.len(),
        second.events.len()
    );
    println!(
        "  metrics byte-identical: {}",
        first.metrics.to_json() == second.metrics.to_json()
    );

    let mut log = Vec::new();
    write_event_log(&first.events, &mut log)?;
    println!("\npersisted log: {} bytes, first lines:", log.len());
    for line in String::from_utf8_lossy(&log).lines().take(3) {
        let shown = if line.len() > 100 { &line[..100] } else { line };
        println!("  {shown}...");
    }

    let parsed = read_event_log(log.as_slice())?;
    let replayed = RunMetrics::from_events(&parsed);
    let ledger = CostLedger::from_events(&parsed);
    println!("\nreplay from the log:");
    println!(
        "  metrics identical    : {}",
        replayed.to_json() == first.metrics.to_json()
    );
    println!(
        "  ledger identical     : {} (total ${:.2})",
        ledger == first.metrics.cost,
        ledger.total_cost
    );
    Ok(())
}
