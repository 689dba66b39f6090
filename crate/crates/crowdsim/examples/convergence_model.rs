//! Pool-speed convergence under idealized replacement.
//!
//! Evicting every worker above the threshold each round and redrawing from
//! the population decays the slow mass geometrically; the simulated mean
//! pool latency tracks the closed form `(1 - q^(n+1)) mu_f + q^(n+1) mu_s`.
//!
//! ```bash
//! cargo run --example convergence_model
//! ```

use crowdsim::pool::{idealized_replacement_mpl, predict_convergence};
use crowdsim::worker::{LatencyDistribution, PopulationSpec, WorkerPopulation};

fn main() -> crowdsim::Result<()> {
    let spec = PopulationSpec {
        latency: LatencyDistribution::Bimodal {
            fast_weight: 0.8,
            fast_mean_s: 30.0,
            fast_std_s: 0.0,
            slow_mean_s: 300.0,
            slow_std_s: 0.0,
        },
        sigma_ratio: 0.0,
        accuracy: 1.0,
    };
    let population = WorkerPopulation::synthesize(&spec, 10_000, 41)?;
    let split = population.split(60.0);
    println!(
        "population: slow fraction q = {:.3}, fast mean = {:.1}s, slow mean = {:.1}s",
        split.slow_fraction,
        split.fast_mean_s.unwrap(),
        split.slow_mean_s.unwrap()
    );
    println!();
    println!("round   simulated MPL (s)   model (s)   gap (s)");
    let observed = idealized_replacement_mpl(&population, 60.0, 20, 10, 400, 17);
    for (step, (mean, _se)) in observed.iter().enumerate() {
        let expected = predict_convergence(&split, step as u32);
        println!(
            "{step:5}   {mean:17.2}   {expected:9.2}   {:7.3}",
            (mean - expected).abs()
        );
    }
    println!();
    println!(
        "limit as rounds grow: {:.2}s (the fast-class mean)",
        predict_convergence(&split, 1000)
    );
    Ok(())
}
