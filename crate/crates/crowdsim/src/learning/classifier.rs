//! Multinomial logistic regression trained by full-batch gradient descent.
//!
//! Deliberately small and deterministic: zero-initialized weights, a fixed
//! epoch budget, L2 regularization, and per-point loss weights. The loss and
//! gradient are exposed separately so tests can check the analytic gradient
//! against finite differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: u32,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            learning_rate: 0.5,
            epochs: 300,
        }
    }
}

/// A linear softmax classifier snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub n_classes: usize,
    pub n_features: usize,
    /// Per-class weight vectors, `weights[class][feature]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    /// Set when training saw a single class and fell back to a constant
    /// prediction.
    pub constant_class: Option<u32>,
}

impl Classifier {
    pub fn from_parts(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Self {
        let n_classes = weights.len();
        let n_features = weights.first().map_or(0, Vec::len);
        Self {
            n_classes,
            n_features,
            weights,
            biases,
            constant_class: None,
        }
    }

    fn zeros(n_classes: usize, n_features: usize) -> Self {
        Self {
            n_classes,
            n_features,
            weights: vec![vec![0.0; n_features]; n_classes],
            biases: vec![0.0; n_classes],
            constant_class: None,
        }
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| b + w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>())
            .collect()
    }

    /// Class probabilities (softmax); sums to 1 within 1e-6.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let logits = self.logits(x);
        softmax(&logits)
    }

    /// Most probable class; ties resolve to the lowest class id.
    pub fn predict(&self, x: &[f64]) -> u32 {
        let probs = self.predict_proba(x);
        let mut best = 0usize;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        best as u32
    }

    /// Top-1 minus top-2 probability: small margins mean uncertain points.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let mut probs = self.predict_proba(x);
        probs.sort_by(|a, b| b.total_cmp(a));
        if probs.len() < 2 {
            return 1.0;
        }
        probs[0] - probs[1]
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Weighted cross-entropy loss with L2 penalty (biases unpenalized).
///
/// Per-point weights multiply each point's loss term; the total is divided by
/// the weight sum, so uniformly scaling all weights leaves the loss (and the
/// trained model) unchanged.
pub fn loss(
    model: &Classifier,
    features: &[&[f64]],
    labels: &[u32],
    point_weights: &[f64],
    l2: f64,
) -> f64 {
    let weight_sum: f64 = point_weights.iter().sum();
    let mut total = 0.0;
    for ((x, &y), &w) in features.iter().zip(labels).zip(point_weights) {
        let probs = model.predict_proba(x);
        total += -w * probs[y as usize].max(1e-300).ln();
    }
    let reg: f64 = model
        .weights
        .iter()
        .flat_map(|row| row.iter())
        .map(|w| w * w)
        .sum();
    total / weight_sum + 0.5 * l2 * reg
}

/// Analytic gradient of [`loss`] with respect to weights and biases.
pub fn gradient(
    model: &Classifier,
    features: &[&[f64]],
    labels: &[u32],
    point_weights: &[f64],
    l2: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let weight_sum: f64 = point_weights.iter().sum();
    let mut grad_w = vec![vec![0.0; model.n_features]; model.n_classes];
    let mut grad_b = vec![0.0; model.n_classes];
    for ((x, &y), &w) in features.iter().zip(labels).zip(point_weights) {
        let probs = model.predict_proba(x);
        for c in 0..model.n_classes {
            let delta = w * (probs[c] - if c == y as usize { 1.0 } else { 0.0 });
            grad_b[c] += delta;
            for (g, xi) in grad_w[c].iter_mut().zip(*x) {
                *g += delta * xi;
            }
        }
    }
    for c in 0..model.n_classes {
        grad_b[c] /= weight_sum;
        for (g, w) in grad_w[c].iter_mut().zip(&model.weights[c]) {
            *g = *g / weight_sum + l2 * w;
        }
    }
    (grad_w, grad_b)
}

/// Train a classifier on weighted labeled points.
///
/// All represented classes must appear in `labels`; a single-class label set
/// degenerates to a constant classifier (flagged via `constant_class`).
pub fn train(
    params: &TrainParams,
    features: &[&[f64]],
    labels: &[u32],
    point_weights: &[f64],
    n_classes: usize,
) -> Result<Classifier> {
    if features.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    assert_eq!(features.len(), labels.len());
    assert_eq!(features.len(), point_weights.len());
    if point_weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::invalid("point_weights", "must be > 0"));
    }
    let n_features = features[0].len();

    let mut seen = vec![false; n_classes];
    for &y in labels {
        seen[y as usize] = true;
    }
    let distinct = seen.iter().filter(|s| **s).count();
    if distinct < 2 {
        let class = labels[0];
        let mut model = Classifier::zeros(n_classes, n_features);
        model.biases[class as usize] = 1.0;
        model.constant_class = Some(class);
        return Ok(model);
    }

    let mut model = Classifier::zeros(n_classes, n_features);
    for _ in 0..params.epochs {
        let (grad_w, grad_b) = gradient(&model, features, labels, point_weights, params.l2);
        for c in 0..n_classes {
            model.biases[c] -= params.learning_rate * grad_b[c];
            for (w, g) in model.weights[c].iter_mut().zip(&grad_w[c]) {
                *w -= params.learning_rate * g;
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::worker::stream_rng;

    fn toy_separable() -> (Vec<Vec<f64>>, Vec<u32>) {
        let features = vec![
            vec![-2.0, -1.5],
            vec![-1.5, -2.0],
            vec![2.0, 1.5],
            vec![1.5, 2.0],
        ];
        let labels = vec![0, 0, 1, 1];
        (features, labels)
    }

    fn views(features: &[Vec<f64>]) -> Vec<&[f64]> {
        features.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let (features, labels) = toy_separable();
        let weights = vec![1.0; labels.len()];
        let model = train(
            &TrainParams::default(),
            &views(&features),
            &labels,
            &weights,
            2,
        )
        .unwrap();
        for (x, y) in features.iter().zip(&labels) {
            assert_eq!(model.predict(x), *y);
        }
    }

    #[test]
    fn probabilities_normalize() {
        let (features, labels) = toy_separable();
        let weights = vec![1.0; labels.len()];
        let model = train(
            &TrainParams::default(),
            &views(&features),
            &labels,
            &weights,
            2,
        )
        .unwrap();
        let mut rng = stream_rng(8, &[1]);
        for _ in 0..200 {
            let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let probs = model.predict_proba(&x);
            let sum: f64 = probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn gradient_matches_finite_differences() {
        // Central finite differences of `loss` are the oracle for the
        // analytic gradient on random small instances.
        let mut rng = stream_rng(42, &[3]);
        for trial in 0..5 {
            let n = 6;
            let d = 3;
            let c = 3;
            let features: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..c as u32)).collect();
            let point_weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
            let mut model = Classifier::zeros(c, d);
            for row in model.weights.iter_mut() {
                for w in row.iter_mut() {
                    *w = rng.gen_range(-1.0..1.0);
                }
            }
            for b in model.biases.iter_mut() {
                *b = rng.gen_range(-1.0..1.0);
            }
            let f = views(&features);
            let (grad_w, grad_b) = gradient(&model, &f, &labels, &point_weights, 1e-4);
            let h = 1e-6;
            for cls in 0..c {
                for j in 0..d {
                    let mut plus = model.clone();
                    plus.weights[cls][j] += h;
                    let mut minus = model.clone();
                    minus.weights[cls][j] -= h;
                    let fd = (loss(&plus, &f, &labels, &point_weights, 1e-4)
                        - loss(&minus, &f, &labels, &point_weights, 1e-4))
                        / (2.0 * h);
                    let g = grad_w[cls][j];
                    let rel = (fd - g).abs() / g.abs().max(fd.abs()).max(1e-8);
                    assert!(rel < 1e-5, "trial {trial} w[{cls}][{j}]: fd {fd} vs {g}");
                }
                let mut plus = model.clone();
                plus.biases[cls] += h;
                let mut minus = model.clone();
                minus.biases[cls] -= h;
                let fd = (loss(&plus, &f, &labels, &point_weights, 1e-4)
                    - loss(&minus, &f, &labels, &point_weights, 1e-4))
                    / (2.0 * h);
                let g = grad_b[cls];
                let rel = (fd - g).abs() / g.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-5, "trial {trial} b[{cls}]: fd {fd} vs {g}");
            }
        }
    }

    #[test]
    fn uniform_weight_scaling_leaves_predictions_unchanged() {
        let (features, labels) = toy_separable();
        let base = vec![1.0, 0.5, 2.0, 1.5];
        let doubled: Vec<f64> = base.iter().map(|w| w * 2.0).collect();
        let a = train(
            &TrainParams::default(),
            &views(&features),
            &labels,
            &base,
            2,
        )
        .unwrap();
        let b = train(
            &TrainParams::default(),
            &views(&features),
            &labels,
            &doubled,
            2,
        )
        .unwrap();
        let mut rng = stream_rng(9, &[2]);
        for _ in 0..100 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let pa = a.predict_proba(&x);
            let pb = b.predict_proba(&x);
            for (p, q) in pa.iter().zip(&pb) {
                assert!((p - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_training_set_errors() {
        let features: Vec<&[f64]> = Vec::new();
        assert!(train(&TrainParams::default(), &features, &[], &[], 2).is_err());
    }

    #[test]
    fn single_class_degenerates_to_constant() {
        let features = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let labels = vec![1, 1];
        let weights = vec![1.0, 1.0];
        let model = train(
            &TrainParams::default(),
            &views(&features),
            &labels,
            &weights,
            3,
        )
        .unwrap();
        assert_eq!(model.constant_class, Some(1));
        let mut rng = stream_rng(10, &[4]);
        for _ in 0..20 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            assert_eq!(model.predict(&x), 1);
        }
    }
}
