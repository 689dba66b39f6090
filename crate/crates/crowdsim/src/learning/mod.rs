//! Model-training loop: uncertainty sampling over a candidate subsample,
//! hybrid active/passive point selection, a write-once label cache, and
//! asynchronous (stale-model) retraining bookkeeping.

pub mod classifier;
pub mod dataset;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use classifier::{Classifier, TrainParams};
pub use dataset::{generate_dataset, Dataset, GeneratorParams};

use crate::error::{Error, Result};

/// Which selection path requested a point's label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    Active,
    Passive,
}

/// Pick the `k` most uncertain points from a uniform candidate subsample of
/// the unlabeled pool. Uncertainty is the top-two probability margin; ties
/// break by point id. With fewer than `k` unlabeled points, returns them all.
pub fn uncertainty_select(
    model: &Classifier,
    dataset: &Dataset,
    unlabeled: &[u64],
    k: usize,
    candidate_sample_size: usize,
    rng: &mut impl Rng,
) -> Vec<u64> {
    if unlabeled.len() <= k {
        let mut all = unlabeled.to_vec();
        all.sort_unstable();
        return all;
    }
    let sample_size = candidate_sample_size.max(k).min(unlabeled.len());
    let mut candidates = unlabeled.to_vec();
    if sample_size < candidates.len() {
        candidates.partial_shuffle(rng, sample_size);
        candidates.truncate(sample_size);
    }
    let mut scored: Vec<(f64, u64)> = candidates
        .into_iter()
        .map(|id| (model.margin(dataset.point(id)), id))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, id)| id).collect()
}

/// Split a labeling round of `p` points into `k` actively selected points
/// plus `max(0, p - k)` random ones. `unlabeled` must already exclude cached
/// points, so the two sets are disjoint and never re-request a cached label.
pub fn hybrid_select(
    model: &Classifier,
    dataset: &Dataset,
    unlabeled: &[u64],
    k: usize,
    p: usize,
    candidate_sample_size: usize,
    rng: &mut impl Rng,
) -> (Vec<u64>, Vec<u64>) {
    let k = k.min(p);
    let active = uncertainty_select(model, dataset, unlabeled, k, candidate_sample_size, rng);
    let remaining: Vec<u64> = unlabeled
        .iter()
        .copied()
        .filter(|id| !active.contains(id))
        .collect();
    let passive = random_select(&remaining, p.saturating_sub(active.len().max(k)), rng);
    (active, passive)
}

/// Uniform random selection without replacement.
pub fn random_select(pool: &[u64], n: usize, rng: &mut impl Rng) -> Vec<u64> {
    let n = n.min(pool.len());
    let mut ids = pool.to_vec();
    ids.partial_shuffle(rng, n);
    ids.truncate(n);
    ids
}

/// Active batch size for a labeling round of `p` points: `round(r * p)`,
/// clamped to [1, p]. For large rounds (p >= 40) the result is additionally
/// clamped into the empirically reasonable 10..=40 range.
pub fn active_batch_size(p: usize, r: f64) -> usize {
    let raw = (r * p as f64).round() as usize;
    if p >= 40 {
        raw.clamp(10, 40)
    } else {
        raw.clamp(1, p)
    }
}

/// Fraction of the holdout the model labels correctly.
pub fn evaluate(model: &Classifier, dataset: &Dataset, holdout: &[u64]) -> Result<f64> {
    if holdout.is_empty() {
        return Err(Error::EmptyHoldout);
    }
    let correct = holdout
        .iter()
        .filter(|&&id| model.predict(dataset.point(id)) == dataset.true_label(id))
        .count();
    Ok(correct as f64 / holdout.len() as f64)
}

/// Retraining and selection configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainConfig {
    pub params: TrainParams,
    /// Fixed component of simulated decision latency, seconds.
    pub base_latency_s: f64,
    /// Per-labeled-point component of decision latency (training cost is
    /// linear in the sample size).
    pub per_label_latency_s: f64,
    /// Loss weight applied to actively selected points; passive points weigh
    /// 1. Defaults to the active-to-passive ratio k/p of the run.
    pub active_weight: f64,
    pub candidate_sample_size: usize,
    /// How many ranked candidates a refreshed frontier holds.
    pub frontier_size: usize,
}

impl Default for RetrainConfig {
    fn default() -> Self {
        Self {
            params: TrainParams::default(),
            base_latency_s: 1.0,
            per_label_latency_s: 0.02,
            active_weight: 0.5,
            candidate_sample_size: 1000,
            frontier_size: 200,
        }
    }
}

/// The next active-selection batch, ranked most-uncertain first, tagged with
/// the model version that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub point_ids: Vec<u64>,
    pub model_version: u64,
    cursor: usize,
}

impl Frontier {
    /// Consume up to `k` not-yet-cached points from the ranked frontier.
    fn take(&mut self, k: usize, cached: &BTreeMap<u64, u32>) -> Vec<u64> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k && self.cursor < self.point_ids.len() {
            let id = self.point_ids[self.cursor];
            self.cursor += 1;
            if !cached.contains_key(&id) {
                out.push(id);
            }
        }
        out
    }
}

/// An asynchronous retrain in flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainJob {
    pub started_at_s: f64,
    pub done_at_s: f64,
    /// Labeled points visible when the retrain started.
    pub snapshot: Vec<u64>,
    /// Version this job will publish.
    pub version: u64,
}

/// Label cache plus model/frontier state for the asynchronous learning loop.
#[derive(Debug, Clone, Default)]
pub struct LearnState {
    labeled: BTreeMap<u64, u32>,
    sources: BTreeMap<u64, PointSource>,
    pub model: Option<Classifier>,
    pub model_version: u64,
    pub frontier: Option<Frontier>,
    pub in_flight: Option<RetrainJob>,
    labels_since_snapshot: u64,
}

impl LearnState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn labeled(&self) -> &BTreeMap<u64, u32> {
        &self.labeled
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled.len()
    }

    pub fn is_cached(&self, point: u64) -> bool {
        self.labeled.contains_key(&point)
    }

    /// Write-once label commit; re-commits of a cached point are ignored.
    /// Returns whether the label was newly cached.
    pub fn commit_label(&mut self, point: u64, label: u32, source: PointSource) -> bool {
        if self.labeled.contains_key(&point) {
            return false;
        }
        self.labeled.insert(point, label);
        self.sources.insert(point, source);
        self.labels_since_snapshot += 1;
        true
    }

    /// Start an asynchronous retrain if none is in flight and new labels
    /// arrived since the last snapshot. Returns the completion time.
    ///
    /// While a retrain runs, selection keeps using the last published model
    /// and frontier; labels arriving mid-flight queue up for the next job.
    pub fn maybe_start_retrain(&mut self, now_s: f64, cfg: &RetrainConfig) -> Option<f64> {
        if self.in_flight.is_some() || self.labels_since_snapshot == 0 || self.labeled.is_empty() {
            return None;
        }
        let snapshot: Vec<u64> = self.labeled.keys().copied().collect();
        let done_at_s =
            now_s + cfg.base_latency_s + cfg.per_label_latency_s * snapshot.len() as f64;
        let job = RetrainJob {
            started_at_s: now_s,
            done_at_s,
            snapshot,
            version: self.model_version + 1,
        };
        self.labels_since_snapshot = 0;
        self.in_flight = Some(job.clone());
        Some(job.done_at_s)
    }

    /// Complete the in-flight retrain: train on its snapshot, publish the new
    /// model version, and refresh the frontier from `selectable` (unlabeled,
    /// uncached) points. Returns the published version.
    pub fn finish_retrain(
        &mut self,
        dataset: &Dataset,
        selectable: &[u64],
        cfg: &RetrainConfig,
        rng: &mut impl Rng,
    ) -> Result<u64> {
        let job = self
            .in_flight
            .take()
            .expect("finish_retrain without a job in flight");
        let features: Vec<&[f64]> = job.snapshot.iter().map(|&id| dataset.point(id)).collect();
        let labels: Vec<u32> = job.snapshot.iter().map(|id| self.labeled[id]).collect();
        let weights: Vec<f64> = job
            .snapshot
            .iter()
            .map(|id| match self.sources[id] {
                PointSource::Active => cfg.active_weight,
                PointSource::Passive => 1.0,
            })
            .collect();
        let model = classifier::train(
            &cfg.params,
            &features,
            &labels,
            &weights,
            dataset.n_classes as usize,
        )?;
        let frontier_ids = uncertainty_select(
            &model,
            dataset,
            selectable,
            cfg.frontier_size,
            cfg.candidate_sample_size,
            rng,
        );
        self.model = Some(model);
        self.model_version = job.version;
        self.frontier = Some(Frontier {
            point_ids: frontier_ids,
            model_version: job.version,
            cursor: 0,
        });
        Ok(self.model_version)
    }

    /// Select a labeling round: `k` active points (consumed from the current
    /// frontier, topped up by scoring against the current model) plus random
    /// passive points up to `p` total. Before any model exists the whole
    /// round is passive.
    pub fn select_round(
        &mut self,
        dataset: &Dataset,
        selectable: &[u64],
        k: usize,
        p: usize,
        cfg: &RetrainConfig,
        rng: &mut impl Rng,
    ) -> (Vec<u64>, Vec<u64>) {
        // No model yet: nothing to score, the whole round is passive.
        let k = if self.model.is_some() {
            k.min(p).min(selectable.len())
        } else {
            0
        };
        let mut active = Vec::new();
        if k > 0 {
            if let Some(frontier) = self.frontier.as_mut() {
                active = frontier.take(k, &self.labeled);
                active.retain(|id| selectable.contains(id));
            }
            if active.len() < k {
                let pool: Vec<u64> = selectable
                    .iter()
                    .copied()
                    .filter(|id| !active.contains(id))
                    .collect();
                if let Some(model) = self.model.as_ref() {
                    let extra = uncertainty_select(
                        model,
                        dataset,
                        &pool,
                        k - active.len(),
                        cfg.candidate_sample_size,
                        rng,
                    );
                    active.extend(extra);
                }
            }
        }
        let remaining: Vec<u64> = selectable
            .iter()
            .copied()
            .filter(|id| !active.contains(id))
            .collect();
        let passive = random_select(&remaining, p.saturating_sub(active.len().max(k)), rng);
        (active, passive)
    }
}
