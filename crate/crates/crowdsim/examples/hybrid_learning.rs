//! Active, passive, and hybrid point selection on easy and hard datasets.
//!
//! Active selection shines when the model's uncertainty is informative
//! (clean, low-dimensional problems) and can stumble on noisy ones; the
//! hybrid split tracks the better of the two in both regimes.
//!
//! ```bash
//! cargo run --release --example hybrid_learning
//! ```

use crowdsim::engine::{run_experiment, Algorithm, Budget, ExperimentParams, RunMetrics};
use crowdsim::learning::{generate_dataset, GeneratorParams};
use crowdsim::stats;
use crowdsim::worker::{WorkerPopulation, WorkerProfile};

fn accuracy_at(metrics: &RunMetrics, max_labels: u64) -> Option<f64> {
    metrics
        .learning_curve
        .iter()
        .rfind(|c| c.n_labels <= max_labels)
        .map(|c| c.accuracy)
}

fn main() -> crowdsim::Result<()> {
    let pool: Vec<WorkerProfile> = (0..20)
        .map(|i| WorkerProfile::new(format!("w{i}"), 5.0, 0.5, 1.0))
        .collect::<crowdsim::Result<_>>()?;
    let population = WorkerPopulation::new(pool, 1)?;
    let regimes = [
        (
            "easy (2 informative features, wide separation)",
            GeneratorParams {
                n_points: 1200,
                n_features: 2,
                n_informative: 2,
                class_sep: 8.0,
                n_classes: 2,
                seed: 0,
            },
        ),
        (
            "hard (5 informative of 40, narrow separation)",
            GeneratorParams {
                n_points: 1200,
                n_features: 40,
                n_informative: 5,
                class_sep: 0.8,
                n_classes: 2,
                seed: 0,
            },
        ),
    ];
    let checkpoints = [100u64, 200, 300, 400];
    for (name, base) in regimes {
        println!("{name}");
        println!("labels    AL      PL      HL   (median holdout accuracy over 10 seeds)");
        let mut curves = vec![vec![Vec::new(); checkpoints.len()]; 3];
        for rep in 0..10u64 {
            let dataset = generate_dataset(&GeneratorParams {
                seed: 900 + rep,
                ..base
            })?;
            for (s, alg) in [Algorithm::AL, Algorithm::PL, Algorithm::HL]
                .into_iter()
                .enumerate()
            {
                let params = ExperimentParams {
                    seed: rep,
                    pool_size: 20,
                    records_per_task: 1,
                    ratio: 1.0,
                    mitigate: false,
                    alg,
                    active_fraction: 0.5,
                    budget: Budget {
                        max_labels: Some(400),
                        ..Budget::default()
                    },
                    ..ExperimentParams::default()
                };
                let metrics = run_experiment(&params, &population, Some(&dataset))?.metrics;
                for (i, &c) in checkpoints.iter().enumerate() {
                    if let Some(acc) = accuracy_at(&metrics, c) {
                        curves[s][i].push(acc);
                    }
                }
            }
        }
        for (i, &c) in checkpoints.iter().enumerate() {
            println!(
                "{c:6}  {:.3}  {:.3}  {:.3}",
                stats::median(&curves[0][i]).unwrap_or(f64::NAN),
                stats::median(&curves[1][i]).unwrap_or(f64::NAN),
                stats::median(&curves[2][i]).unwrap_or(f64::NAN),
            );
        }
        println!();
    }
    Ok(())
}
