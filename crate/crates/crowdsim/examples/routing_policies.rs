//! Duplicate-routing policies compared.
//!
//! When mitigation has spare workers, which in-flight task should get the
//! duplicate? Over a trace-like pool the answer barely matters: random is
//! within a few percent of an oracle that knows every sampled finish time.
//!
//! ```bash
//! cargo run --example routing_policies
//! ```

use crowdsim::engine::{run_experiment, Budget, ExperimentParams};
use crowdsim::scheduler::RoutingPolicy;
use crowdsim::stats;
use crowdsim::worker::{LatencyDistribution, PopulationSpec, WorkerPopulation};

fn main() -> crowdsim::Result<()> {
    let spec = PopulationSpec {
        latency: LatencyDistribution::LogNormal {
            location: 40.0f64.ln(),
            scale: 1.0,
        },
        sigma_ratio: 1.0,
        accuracy: 1.0,
    };
    let population = WorkerPopulation::synthesize(&spec, 500, 53)?;
    let policies = [
        ("random", RoutingPolicy::Random),
        ("longest_running", RoutingPolicy::LongestRunning),
        ("fewest_active", RoutingPolicy::FewestActive),
        ("oracle", RoutingPolicy::Oracle),
    ];
    println!("policy            mean batch makespan (s) over 30 seeds");
    for (name, policy) in policies {
        let mut means = Vec::new();
        for seed in 0..30u64 {
            let params = ExperimentParams {
                seed,
                pool_size: 15,
                records_per_task: 5,
                ratio: 1.0,
                mitigate: true,
                policy,
                switch_overhead_s: 0.0,
                budget: Budget {
                    max_tasks: Some(150),
                    ..Budget::default()
                },
                ..ExperimentParams::default()
            };
            let out = run_experiment(&params, &population, None)?;
            means.push(stats::mean(&out.metrics.batch_makespans_s).unwrap());
        }
        println!("{name:<16}  {:.2}", stats::mean(&means).unwrap());
    }
    Ok(())
}
