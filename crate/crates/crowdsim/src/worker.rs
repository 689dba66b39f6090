//! Stochastic worker population: trace ingestion, synthetic pools, and
//! per-assignment latency/label sampling.
//!
//! Each worker is summarized by a mean task latency, a latency standard
//! deviation, and a label accuracy. Assignment latencies are drawn from a
//! normal with those moments and clamped at a positive floor; labels are
//! correct with the worker's accuracy probability.

use std::collections::BTreeMap;
use std::io::BufRead;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Hard lower bound on any sampled latency, in seconds.
pub const MIN_LATENCY_FLOOR_S: f64 = 0.1;

/// One worker's generative parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub id: String,
    /// Mean task latency in seconds (> 0).
    pub mean_latency_s: f64,
    /// Latency standard deviation in seconds (>= 0).
    pub latency_std_s: f64,
    /// Probability that a produced label is correct, in [0, 1].
    pub accuracy: f64,
}

impl WorkerProfile {
    pub fn new(
        id: impl Into<String>,
        mean_latency_s: f64,
        latency_std_s: f64,
        accuracy: f64,
    ) -> Result<Self> {
        if !(mean_latency_s > 0.0) {
            return Err(Error::invalid("mean_latency_s", "must be > 0"));
        }
        if !(latency_std_s >= 0.0) {
            return Err(Error::invalid("latency_std_s", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::invalid("accuracy", "must be in [0, 1]"));
        }
        Ok(Self {
            id: id.into(),
            mean_latency_s,
            latency_std_s,
            accuracy,
        })
    }

    /// Draw one task latency, clamped at `max(floor_s, MIN_LATENCY_FLOOR_S)`.
    ///
    /// A zero standard deviation always yields the mean exactly.
    pub fn sample_latency(&self, floor_s: f64, rng: &mut impl Rng) -> f64 {
        let floor = floor_s.max(MIN_LATENCY_FLOOR_S);
        if self.latency_std_s == 0.0 {
            return self.mean_latency_s.max(floor);
        }
        let normal = Normal::new(self.mean_latency_s, self.latency_std_s)
            .expect("profile invariants guarantee a valid normal");
        normal.sample(rng).max(floor)
    }

    /// Draw whether one produced label is correct.
    pub fn sample_label_correct(&self, rng: &mut impl Rng) -> bool {
        rng.gen_bool(self.accuracy)
    }
}

/// Result of sampling a single assignment from a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignmentSample {
    pub latency_s: f64,
    pub label_correct: bool,
}

/// Draw an assignment's latency and label correctness from a profile.
pub fn sample_assignment(
    profile: &WorkerProfile,
    floor_s: f64,
    rng: &mut impl Rng,
) -> AssignmentSample {
    AssignmentSample {
        latency_s: profile.sample_latency(floor_s, rng),
        label_correct: profile.sample_label_correct(rng),
    }
}

/// Distribution of per-worker mean latencies in a synthetic population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum LatencyDistribution {
    /// Log-normal over worker means: `location`/`scale` are the underlying
    /// normal's parameters.
    #[serde(rename = "lognormal")]
    LogNormal { location: f64, scale: f64 },
    /// Two normal modes (e.g. a fast majority and a slow tail). Weights are
    /// the fast mode's probability mass.
    #[serde(rename = "bimodal", alias = "bimodal-normal-mixture")]
    Bimodal {
        fast_weight: f64,
        fast_mean_s: f64,
        fast_std_s: f64,
        slow_mean_s: f64,
        slow_std_s: f64,
    },
    /// Resample worker means uniformly from an observed list.
    #[serde(rename = "empirical", alias = "empirical-resample")]
    Empirical { means_s: Vec<f64> },
}

impl LatencyDistribution {
    fn validate(&self) -> Result<()> {
        match self {
            LatencyDistribution::LogNormal { scale, .. } => {
                if !(*scale > 0.0) {
                    return Err(Error::invalid("scale", "must be > 0"));
                }
            }
            LatencyDistribution::Bimodal {
                fast_weight,
                fast_mean_s,
                fast_std_s,
                slow_mean_s,
                slow_std_s,
            } => {
                if !(0.0..=1.0).contains(fast_weight) {
                    return Err(Error::invalid("fast_weight", "must be in [0, 1]"));
                }
                if !(*fast_mean_s > 0.0) || !(*slow_mean_s > 0.0) {
                    return Err(Error::invalid("mean_s", "mode means must be > 0"));
                }
                if !(*fast_std_s >= 0.0) || !(*slow_std_s >= 0.0) {
                    return Err(Error::invalid("std_s", "mode stds must be >= 0"));
                }
            }
            LatencyDistribution::Empirical { means_s } => {
                if means_s.is_empty() {
                    return Err(Error::invalid("means_s", "must be non-empty"));
                }
                if means_s.iter().any(|m| !(*m > 0.0)) {
                    return Err(Error::invalid("means_s", "all means must be > 0"));
                }
            }
        }
        Ok(())
    }

    fn sample_mean(&self, rng: &mut impl Rng) -> f64 {
        let mu = match self {
            LatencyDistribution::LogNormal { location, scale } => {
                LogNormal::new(*location, *scale).unwrap().sample(rng)
            }
            LatencyDistribution::Bimodal {
                fast_weight,
                fast_mean_s,
                fast_std_s,
                slow_mean_s,
                slow_std_s,
            } => {
                let (mean, std) = if rng.gen_bool(*fast_weight) {
                    (*fast_mean_s, *fast_std_s)
                } else {
                    (*slow_mean_s, *slow_std_s)
                };
                if std == 0.0 {
                    mean
                } else {
                    Normal::new(mean, std).unwrap().sample(rng)
                }
            }
            LatencyDistribution::Empirical { means_s } => means_s[rng.gen_range(0..means_s.len())],
        };
        mu.max(MIN_LATENCY_FLOOR_S)
    }
}

/// Parameters for synthesizing a worker population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    #[serde(flatten)]
    pub latency: LatencyDistribution,
    /// Per-worker latency std as a fraction of that worker's mean.
    #[serde(default = "default_sigma_ratio")]
    pub sigma_ratio: f64,
    /// Label accuracy shared by all synthesized workers.
    #[serde(default = "default_accuracy")]
    pub accuracy: f64,
}

fn default_sigma_ratio() -> f64 {
    0.15
}

fn default_accuracy() -> f64 {
    1.0
}

/// A population of worker profiles that recruitment draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerPopulation {
    profiles: Vec<WorkerProfile>,
    pub seed: u64,
}

impl WorkerPopulation {
    pub fn new(profiles: Vec<WorkerProfile>, seed: u64) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        Ok(Self { profiles, seed })
    }

    /// Parse a worker trace: a delimited text file with header
    /// `worker_id,latency_s[,correct]`. One profile per distinct worker, with
    /// the empirical mean and sample standard deviation (n-1) of its
    /// latencies. The optional `correct` column (0/1) averages into the
    /// worker's accuracy; absent, accuracy defaults to 1.0.
    pub fn from_trace_reader(reader: impl BufRead) -> Result<Self> {
        // worker -> (latencies, correct-count, correct-total)
        let mut per_worker: BTreeMap<String, (Vec<f64>, u64, u64)> = BTreeMap::new();
        let mut rows = 0usize;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if idx == 0 && trimmed.starts_with("worker_id") {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(Error::Trace {
                    row: idx + 1,
                    reason: format!("expected 2 or 3 fields, got {}", fields.len()),
                });
            }
            let latency: f64 = fields[1].parse().map_err(|_| Error::Trace {
                row: idx + 1,
                reason: format!("unparseable latency {:?}", fields[1]),
            })?;
            if !(latency > 0.0) {
                return Err(Error::Trace {
                    row: idx + 1,
                    reason: format!("non-positive latency {latency}"),
                });
            }
            let entry = per_worker
                .entry(fields[0].to_string())
                .or_insert_with(|| (Vec::new(), 0, 0));
            entry.0.push(latency);
            if fields.len() == 3 {
                let correct: u8 = fields[2].parse().map_err(|_| Error::Trace {
                    row: idx + 1,
                    reason: format!("unparseable correct flag {:?}", fields[2]),
                })?;
                if correct > 1 {
                    return Err(Error::Trace {
                        row: idx + 1,
                        reason: format!("correct flag must be 0 or 1, got {correct}"),
                    });
                }
                entry.1 += u64::from(correct);
                entry.2 += 1;
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::Trace {
                row: 0,
                reason: "trace contains no data rows".into(),
            });
        }
        let profiles = per_worker
            .into_iter()
            .map(|(id, (latencies, correct, labeled))| {
                let mu = stats::mean(&latencies).unwrap();
                let sigma = stats::sample_std(&latencies).unwrap();
                let accuracy = if labeled > 0 {
                    correct as f64 / labeled as f64
                } else {
                    1.0
                };
                WorkerProfile::new(id, mu, sigma, accuracy)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(profiles, 0)
    }

    /// Synthesize a deterministic population of `count` workers from a
    /// latency distribution spec and a seed.
    pub fn synthesize(spec: &PopulationSpec, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("count", "must be >= 1"));
        }
        spec.latency.validate()?;
        if !(spec.sigma_ratio >= 0.0) {
            return Err(Error::invalid("sigma_ratio", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&spec.accuracy) {
            return Err(Error::invalid("accuracy", "must be in [0, 1]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = count.to_string().len().max(3);
        let profiles = (0..count)
            .map(|i| {
                let mu = spec.latency.sample_mean(&mut rng);
                WorkerProfile::new(
                    format!("w{i:0width$}"),
                    mu,
                    spec.sigma_ratio * mu,
                    spec.accuracy,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(profiles, seed)
    }

    pub fn profiles(&self) -> &[WorkerProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Mean of per-worker mean latencies.
    pub fn mean_latency_s(&self) -> f64 {
        self.profiles.iter().map(|p| p.mean_latency_s).sum::<f64>() / self.profiles.len() as f64
    }

    /// Draw one profile uniformly (recruitment is i.i.d. resampling).
    pub fn draw(&self, rng: &mut impl Rng) -> &WorkerProfile {
        &self.profiles[rng.gen_range(0..self.profiles.len())]
    }

    /// The population's default recruitment stream, derived from its seed.
    pub fn recruit_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    /// Split the population at a latency threshold: the slow mass is the
    /// fraction of workers with mean latency strictly above the threshold.
    pub fn split(&self, threshold_s: f64) -> PopulationSplit {
        let mut fast = (0u64, 0.0f64);
        let mut slow = (0u64, 0.0f64);
        for p in &self.profiles {
            if p.mean_latency_s > threshold_s {
                slow.0 += 1;
                slow.1 += p.mean_latency_s;
            } else {
                fast.0 += 1;
                fast.1 += p.mean_latency_s;
            }
        }
        PopulationSplit {
            threshold_s,
            slow_fraction: slow.0 as f64 / self.profiles.len() as f64,
            fast_mean_s: (fast.0 > 0).then(|| fast.1 / fast.0 as f64),
            slow_mean_s: (slow.0 > 0).then(|| slow.1 / slow.0 as f64),
        }
    }
}

/// Empirical two-class summary of a population at a latency threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSplit {
    pub threshold_s: f64,
    /// Fraction of workers with mean latency above the threshold.
    pub slow_fraction: f64,
    /// Mean latency of workers at or below the threshold, absent if none.
    pub fast_mean_s: Option<f64>,
    /// Mean latency of workers above the threshold, absent if none.
    pub slow_mean_s: Option<f64>,
}

/// Deterministic per-assignment RNG stream.
///
/// Streams are keyed by (seed, worker, task, attempt) so that adding workers,
/// duplicating assignments, or reordering unrelated events never perturbs the
/// draws of an existing (worker, task) pair.
pub fn assignment_rng(seed: u64, worker_uid: u64, task_uid: u64, attempt: u32) -> ChaCha8Rng {
    stream_rng(seed, &[1, worker_uid, task_uid, attempt as u64])
}

/// Deterministic named RNG stream for purpose-scoped draws.
pub fn stream_rng(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908;
    for k in key {
        state = splitmix64(state ^ splitmix64(*k));
    }
    let mut bytes = [0u8; 32];
    let mut s = state;
    for chunk in bytes.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn trace(text: &str) -> Result<WorkerPopulation> {
        WorkerPopulation::from_trace_reader(Cursor::new(text))
    }

    #[test]
    fn trace_profiles_use_sample_std() {
        let pop = trace("worker_id,latency_s\nA,10\nA,14\n").unwrap();
        let p = &pop.profiles()[0];
        assert_eq!(p.mean_latency_s, 12.0);
        assert!((p.latency_std_s - 8.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(p.accuracy, 1.0);
    }

    #[test]
    fn trace_single_observation_has_zero_std() {
        let pop = trace("worker_id,latency_s\nB,30\n").unwrap();
        let p = &pop.profiles()[0];
        assert_eq!(p.mean_latency_s, 30.0);
        assert_eq!(p.latency_std_s, 0.0);
    }

    #[test]
    fn trace_accuracy_column() {
        let pop = trace("worker_id,latency_s,correct\nA,10,1\nA,20,0\nA,30,1\n").unwrap();
        let p = &pop.profiles()[0];
        assert!((p.accuracy - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn trace_rejects_empty_and_bad_rows() {
        assert!(matches!(trace(""), Err(Error::Trace { row: 0, .. })));
        assert!(matches!(
            trace("worker_id,latency_s\nA,-3\n"),
            Err(Error::Trace { row: 2, .. })
        ));
        assert!(matches!(
            trace("worker_id,latency_s\nA,abc\n"),
            Err(Error::Trace { row: 2, .. })
        ));
        assert!(matches!(
            trace("worker_id,latency_s\nA\n"),
            Err(Error::Trace { row: 2, .. })
        ));
    }

    #[test]
    fn synthesize_is_deterministic() {
        let spec = PopulationSpec {
            latency: LatencyDistribution::LogNormal {
                location: 60.0f64.ln(),
                scale: 1.0,
            },
            sigma_ratio: 0.15,
            accuracy: 1.0,
        };
        let a = WorkerPopulation::synthesize(&spec, 100, 7).unwrap();
        let b = WorkerPopulation::synthesize(&spec, 100, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        let c = WorkerPopulation::synthesize(&spec, 100, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthesize_zero_count_is_an_error() {
        let spec = PopulationSpec {
            latency: LatencyDistribution::Empirical { means_s: vec![5.0] },
            sigma_ratio: 0.0,
            accuracy: 1.0,
        };
        assert!(WorkerPopulation::synthesize(&spec, 0, 1).is_err());
    }

    #[test]
    fn bimodal_population_mean_matches_mixture() {
        // 0.8 * 30 + 0.2 * 300 = 84.
        let spec = PopulationSpec {
            latency: LatencyDistribution::Bimodal {
                fast_weight: 0.8,
                fast_mean_s: 30.0,
                fast_std_s: 5.0,
                slow_mean_s: 300.0,
                slow_std_s: 60.0,
            },
            sigma_ratio: 0.15,
            accuracy: 1.0,
        };
        let pop = WorkerPopulation::synthesize(&spec, 20_000, 11).unwrap();
        assert!((pop.mean_latency_s() - 84.0).abs() < 4.0);
    }

    #[test]
    fn zero_std_profile_always_samples_mean() {
        let p = WorkerProfile::new("w", 60.0, 0.0, 1.0).unwrap();
        let mut rng = stream_rng(3, &[9]);
        for _ in 0..100 {
            assert_eq!(p.sample_latency(0.1, &mut rng), 60.0);
        }
    }

    #[test]
    fn full_accuracy_profile_always_correct() {
        let p = WorkerProfile::new("w", 10.0, 2.0, 1.0).unwrap();
        let mut rng = stream_rng(4, &[2]);
        for _ in 0..100 {
            assert!(p.sample_label_correct(&mut rng));
        }
    }

    #[test]
    fn clamp_rate_matches_normal_cdf() {
        // For mu=5, sigma=10, floor=0.1, the clamp probability is
        // Phi((0.1 - 5) / 10); check the empirical rate against that oracle.
        let p = WorkerProfile::new("w", 5.0, 10.0, 1.0).unwrap();
        let expected = stats::normal_cdf((0.1 - 5.0) / 10.0);
        let mut rng = stream_rng(99, &[1]);
        let draws = 1_000_000;
        let clamped = (0..draws)
            .filter(|_| p.sample_latency(0.1, &mut rng) == 0.1)
            .count();
        let rate = clamped as f64 / draws as f64;
        assert!(
            (rate - expected).abs() < 0.01,
            "clamp rate {rate} vs oracle {expected}"
        );
    }

    #[test]
    fn empirical_accuracy_close_to_lambda() {
        let p = WorkerProfile::new("w", 10.0, 1.0, 0.7).unwrap();
        let mut rng = stream_rng(5, &[6]);
        let draws = 100_000;
        let correct = (0..draws)
            .filter(|_| p.sample_label_correct(&mut rng))
            .count();
        let rate = correct as f64 / draws as f64;
        assert!((rate - 0.7).abs() < 0.01);
    }

    #[test]
    fn split_enumeration_example() {
        let profiles = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, mu)| WorkerProfile::new(format!("w{i}"), *mu, 0.0, 1.0).unwrap())
            .collect();
        let pop = WorkerPopulation::new(profiles, 0).unwrap();
        let split = pop.split(2.5);
        assert_eq!(split.slow_fraction, 0.5);
        assert_eq!(split.fast_mean_s, Some(1.5));
        assert_eq!(split.slow_mean_s, Some(3.5));
    }

    #[test]
    fn split_boundaries() {
        let profiles = vec![
            WorkerProfile::new("a", 5.0, 0.0, 1.0).unwrap(),
            WorkerProfile::new("b", 6.0, 0.0, 1.0).unwrap(),
        ];
        let pop = WorkerPopulation::new(profiles, 0).unwrap();
        let above = pop.split(100.0);
        assert_eq!(above.slow_fraction, 0.0);
        assert_eq!(above.slow_mean_s, None);
        let below = pop.split(1.0);
        assert_eq!(below.slow_fraction, 1.0);
        assert_eq!(below.fast_mean_s, None);
    }

    #[test]
    fn split_mixture_identity() {
        // q * mu_s + (1 - q) * mu_f equals the population mean.
        let spec = PopulationSpec {
            latency: LatencyDistribution::LogNormal {
                location: 3.0,
                scale: 0.8,
            },
            sigma_ratio: 0.1,
            accuracy: 1.0,
        };
        let pop = WorkerPopulation::synthesize(&spec, 500, 21).unwrap();
        for threshold in [5.0, 15.0, 30.0, 90.0] {
            let s = pop.split(threshold);
            let recomposed = s.slow_fraction * s.slow_mean_s.unwrap_or(0.0)
                + (1.0 - s.slow_fraction) * s.fast_mean_s.unwrap_or(0.0);
            assert!(
                (recomposed - pop.mean_latency_s()).abs() < 1e-9,
                "threshold {threshold}"
            );
        }
    }

    #[test]
    fn assignment_streams_are_isolated() {
        let a1: Vec<u64> = {
            let mut rng = assignment_rng(7, 1, 10, 0);
            (0..4).map(|_| rng.gen()).collect()
        };
        let a2: Vec<u64> = {
            let mut rng = assignment_rng(7, 1, 10, 0);
            (0..4).map(|_| rng.gen()).collect()
        };
        assert_eq!(a1, a2);
        let other_worker: Vec<u64> = {
            let mut rng = assignment_rng(7, 2, 10, 0);
            (0..4).map(|_| rng.gen()).collect()
        };
        assert_ne!(a1, other_worker);
        let other_attempt: Vec<u64> = {
            let mut rng = assignment_rng(7, 1, 10, 1);
            (0..4).map(|_| rng.gen()).collect()
        };
        assert_ne!(a1, other_attempt);
    }
}
