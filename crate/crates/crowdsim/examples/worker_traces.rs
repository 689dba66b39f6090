//! Building worker populations: trace ingestion and synthesis.
//!
//! Profiles carry each worker's mean task latency, its spread, and label
//! accuracy; assignments sample from them. A latency threshold splits any
//! population into fast and slow mass for the convergence model.
//!
//! ```bash
//! cargo run --example worker_traces
//! ```

use std::io::Cursor;

use crowdsim::worker::{
    sample_assignment, stream_rng, LatencyDistribution, PopulationSpec, WorkerPopulation,
};

const TRACE: &str = "\
worker_id,latency_s,correct
ant,12.0,1
ant,16.0,1
ant,14.0,0
bee,95.0,1
bee,110.0,1
cricket,31.0,1
cricket,29.0,0
cricket,30.0,1
cricket,33.0,1
";

fn main() -> crowdsim::Result<()> {
    let pop = WorkerPopulation::from_trace_reader(Cursor::new(TRACE))?;
    println!("trace-derived profiles:");
    println!("worker     mean (s)   std (s)   accuracy");
    for p in pop.profiles() {
        println!(
            "{:<9}  {:8.2}  {:8.2}   {:.2}",
            p.id, p.mean_latency_s, p.latency_std_s, p.accuracy
        );
    }

    let split = pop.split(60.0);
    println!(
        "\nsplit at 60s: slow fraction {:.2}, fast mean {:.1}s, slow mean {:.1}s",
        split.slow_fraction,
        split.fast_mean_s.unwrap(),
        split.slow_mean_s.unwrap()
    );

    let mut rng = stream_rng(7, &[1]);
    let worker = &pop.profiles()[0];
    println!("\nfive sampled assignments for {:?}:", worker.id);
    for _ in 0..5 {
        let sample = sample_assignment(worker, 0.1, &mut rng);
        println!(
            "  latency {:5.2}s, label {}",
            sample.latency_s,
            if sample.label_correct {
                "correct"
            } else {
                "wrong"
            }
        );
    }

    // Synthetic pools for experiments that need a specific shape.
    let spec = PopulationSpec {
        latency: LatencyDistribution::LogNormal {
            location: 60.0f64.ln(),
            scale: 1.0,
        },
        sigma_ratio: 0.2,
        accuracy: 0.95,
    };
    let synth = WorkerPopulation::synthesize(&spec, 1000, 7)?;
    println!(
        "\nsynthesized log-normal pool: {} workers, mean of means {:.1}s",
        synth.len(),
        synth.mean_latency_s()
    );
    Ok(())
}
