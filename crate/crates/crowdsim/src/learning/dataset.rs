//! Classification datasets: a seeded synthetic generator with tunable
//! difficulty, plus ingestion of small delimited feature files.
//!
//! Generated problems place class centroids at hypercube corners scaled by
//! `class_sep`, draw informative features as unit Gaussians around the
//! centroid, pad with pure-noise features, and apply a random rotation so no
//! single column gives the class away.

use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::worker::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_points: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub class_sep: f64,
    pub n_classes: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Row-major feature matrix, `n_points x n_features`.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
    pub n_classes: u32,
    pub generator: Option<GeneratorParams>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn point(&self, id: u64) -> &[f64] {
        &self.features[id as usize]
    }

    pub fn true_label(&self, id: u64) -> u32 {
        self.labels[id as usize]
    }

    /// Deterministic holdout split: returns (train ids, holdout ids).
    pub fn holdout_split(&self, holdout_frac: f64, seed: u64) -> (Vec<u64>, Vec<u64>) {
        let mut ids: Vec<u64> = (0..self.len() as u64).collect();
        let mut rng = stream_rng(seed, &[11, 17]);
        ids.shuffle(&mut rng);
        let n_holdout = ((self.len() as f64) * holdout_frac).round() as usize;
        let n_holdout = n_holdout.min(self.len().saturating_sub(1));
        let holdout: Vec<u64> = ids[..n_holdout].to_vec();
        let train: Vec<u64> = ids[n_holdout..].to_vec();
        (train, holdout)
    }

    /// Parse a delimited feature file with rows `label,f1,...,fd`.
    pub fn from_csv_reader(reader: impl BufRead) -> Result<Self> {
        let mut features = Vec::new();
        let mut labels: Vec<u32> = Vec::new();
        let mut width = None;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if idx == 0 && trimmed.starts_with("label") {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() < 2 {
                return Err(Error::Dataset {
                    row: idx + 1,
                    reason: "expected label plus at least one feature".into(),
                });
            }
            let label: u32 = fields[0].parse().map_err(|_| Error::Dataset {
                row: idx + 1,
                reason: format!("unparseable label {:?}", fields[0]),
            })?;
            let row: Vec<f64> = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Dataset {
                        row: idx + 1,
                        reason: format!("unparseable feature {f:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset {
                    row: idx + 1,
                    reason: "non-finite feature value".into(),
                });
            }
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Dataset {
                        row: idx + 1,
                        reason: format!("expected {w} features, got {}", row.len()),
                    });
                }
                _ => {}
            }
            labels.push(label);
            features.push(row);
        }
        if features.is_empty() {
            return Err(Error::Dataset {
                row: 0,
                reason: "file contains no data rows".into(),
            });
        }
        let n_classes = labels.iter().copied().max().unwrap() + 1;
        Ok(Self {
            features,
            labels,
            n_classes,
            generator: None,
        })
    }
}

/// Generate a seeded classification dataset of controllable difficulty.
pub fn generate_dataset(params: &GeneratorParams) -> Result<Dataset> {
    if params.n_points == 0 {
        return Err(Error::invalid("n_points", "must be >= 1"));
    }
    if params.n_informative == 0 || params.n_informative > params.n_features {
        return Err(Error::invalid(
            "n_informative",
            "must satisfy 1 <= n_informative <= n_features",
        ));
    }
    if params.n_classes < 2 {
        return Err(Error::invalid("n_classes", "must be >= 2"));
    }
    if !(params.class_sep > 0.0) {
        return Err(Error::invalid("class_sep", "must be > 0"));
    }
    if params.n_informative < 63 && u64::from(params.n_classes) > (1u64 << params.n_informative) {
        return Err(Error::invalid(
            "n_classes",
            "needs n_classes <= 2^n_informative hypercube corners",
        ));
    }

    let mut rng = stream_rng(params.seed, &[5, 23]);
    let d = params.n_features;
    let rotation = random_orthogonal(d, &mut rng);

    let mut features = Vec::with_capacity(params.n_points);
    let mut labels = Vec::with_capacity(params.n_points);
    for i in 0..params.n_points {
        let class = (i as u32) % params.n_classes;
        let mut raw = Vec::with_capacity(d);
        for j in 0..params.n_informative {
            let corner = if (class >> j) & 1 == 1 { 1.0 } else { -1.0 };
            let noise: f64 = StandardNormal.sample(&mut rng);
            raw.push(corner * params.class_sep + noise);
        }
        for _ in params.n_informative..d {
            raw.push(StandardNormal.sample(&mut rng));
        }
        features.push(rotate(&rotation, &raw));
        labels.push(class);
    }

    // Shuffle so class labels are not positionally ordered.
    let mut order: Vec<usize> = (0..params.n_points).collect();
    order.shuffle(&mut rng);
    let features = order.iter().map(|&i| features[i].clone()).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();

    Ok(Dataset {
        features,
        labels,
        n_classes: params.n_classes,
        generator: Some(*params),
    })
}

/// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
fn random_orthogonal(d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    for i in 0..d {
        for j in 0..i {
            let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            let row_j = rows[j].clone();
            for (a, b) in rows[i].iter_mut().zip(&row_j) {
                *a -= dot * b;
            }
        }
        let norm: f64 = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            // Degenerate draw; replace with a unit basis vector.
            rows[i] = (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect();
        } else {
            for v in rows[i].iter_mut() {
                *v /= norm;
            }
        }
    }
    rows
}

fn rotate(rotation: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    rotation
        .iter()
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::classifier::{self, TrainParams};
    use std::io::Cursor;

    fn train_accuracy(ds: &Dataset) -> f64 {
        let features: Vec<&[f64]> = ds.features.iter().map(Vec::as_slice).collect();
        let weights = vec![1.0; ds.len()];
        let model = classifier::train(
            &TrainParams::default(),
            &features,
            &ds.labels,
            &weights,
            ds.n_classes as usize,
        )
        .unwrap();
        let correct = ds
            .features
            .iter()
            .zip(&ds.labels)
            .filter(|(x, y)| model.predict(x) == **y)
            .count();
        correct as f64 / ds.len() as f64
    }

    #[test]
    fn generation_is_deterministic() {
        let params = GeneratorParams {
            n_points: 200,
            n_features: 5,
            n_informative: 3,
            class_sep: 2.0,
            n_classes: 3,
            seed: 77,
        };
        let a = generate_dataset(&params).unwrap();
        let b = generate_dataset(&params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn easy_dataset_is_linearly_separable() {
        let params = GeneratorParams {
            n_points: 500,
            n_features: 2,
            n_informative: 2,
            class_sep: 10.0,
            n_classes: 2,
            seed: 3,
        };
        let ds = generate_dataset(&params).unwrap();
        assert!(train_accuracy(&ds) >= 0.99);
    }

    #[test]
    fn difficulty_increases_as_separation_shrinks() {
        let easy = generate_dataset(&GeneratorParams {
            n_points: 500,
            n_features: 2,
            n_informative: 2,
            class_sep: 10.0,
            n_classes: 2,
            seed: 4,
        })
        .unwrap();
        let hard = generate_dataset(&GeneratorParams {
            n_points: 500,
            n_features: 40,
            n_informative: 5,
            class_sep: 0.5,
            n_classes: 2,
            seed: 4,
        })
        .unwrap();
        let easy_acc = train_accuracy(&easy);
        let hard_acc = train_accuracy(&hard);
        assert!(
            hard_acc < easy_acc,
            "hard {hard_acc} should trail easy {easy_acc}"
        );
    }

    #[test]
    fn parameter_validation() {
        let base = GeneratorParams {
            n_points: 10,
            n_features: 4,
            n_informative: 2,
            class_sep: 1.0,
            n_classes: 2,
            seed: 0,
        };
        assert!(generate_dataset(&GeneratorParams {
            n_points: 0,
            ..base
        })
        .is_err());
        assert!(generate_dataset(&GeneratorParams {
            n_informative: 5,
            ..base
        })
        .is_err());
        assert!(generate_dataset(&GeneratorParams {
            n_classes: 1,
            ..base
        })
        .is_err());
        assert!(generate_dataset(&GeneratorParams {
            class_sep: 0.0,
            ..base
        })
        .is_err());
        assert!(generate_dataset(&GeneratorParams {
            n_classes: 8,
            n_informative: 2,
            ..base
        })
        .is_err());
    }

    #[test]
    fn holdout_split_is_deterministic_and_disjoint() {
        let ds = generate_dataset(&GeneratorParams {
            n_points: 100,
            n_features: 3,
            n_informative: 2,
            class_sep: 1.0,
            n_classes: 2,
            seed: 5,
        })
        .unwrap();
        let (train_a, hold_a) = ds.holdout_split(0.2, 9);
        let (train_b, hold_b) = ds.holdout_split(0.2, 9);
        assert_eq!(train_a, train_b);
        assert_eq!(hold_a, hold_b);
        assert_eq!(hold_a.len(), 20);
        assert_eq!(train_a.len(), 80);
        for id in &hold_a {
            assert!(!train_a.contains(id));
        }
    }

    #[test]
    fn csv_ingestion() {
        let ds = Dataset::from_csv_reader(Cursor::new(
            "label,f1,f2\n0,1.5,2.0\n1,-0.5,0.25\n0,0.0,1.0\n",
        ))
        .unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_classes, 2);
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.features[1], vec![-0.5, 0.25]);

        assert!(Dataset::from_csv_reader(Cursor::new("")).is_err());
        assert!(Dataset::from_csv_reader(Cursor::new("label,f1\nx,1.0\n")).is_err());
        assert!(Dataset::from_csv_reader(Cursor::new("label,f1\n0,1.0\n1,2.0,3.0\n")).is_err());
    }
}
