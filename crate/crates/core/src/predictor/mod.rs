//! Per-instance adaptive composition selection: an independent logistic
//! regression per composition over hashed text features, predicting whether
//! that composition classifies the instance correctly. Training is seeded,
//! single-threaded minibatch SGD so repeated runs are bitwise identical.

pub mod features;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::LabelMatrix;
use crate::space::{CompositionId, CompositionSpace};

pub use features::{featurize, DEFAULT_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: DEFAULT_DIM,
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.5,
            seed: 0,
        }
    }
}

/// Trained multi-label model bound to the composition space it was trained
/// against via the space fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    pub space_fingerprint: String,
    pub composition_ids: Vec<CompositionId>,
    pub dim: usize,
    /// Dense weights, one row per composition.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Serialized form: weights stored sparsely as (index, value) pairs with
/// ascending indices.
#[derive(Serialize, Deserialize)]
struct SparseModel {
    space_fingerprint: String,
    composition_ids: Vec<CompositionId>,
    dim: usize,
    weights: Vec<Vec<(usize, f64)>>,
    bias: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable binary cross-entropy in terms of the logit.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl PredictorModel {
    pub fn check_space(&self, space: &CompositionSpace) -> Result<()> {
        if self.space_fingerprint != space.fingerprint() {
            return Err(CoreError::Predictor(
                "model was trained against a different composition space".into(),
            ));
        }
        Ok(())
    }

    /// Per-composition probability that the composition answers this text
    /// correctly, in `composition_ids` order.
    pub fn predict_scores(&self, text: &str) -> Vec<f64> {
        let features = featurize(text, self.dim);
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| {
                let z: f64 = b + features.iter().map(|(i, v)| w[*i] * v).sum::<f64>();
                sigmoid(z)
            })
            .collect()
    }

    /// Highest-scoring composition; ties break to the lowest composition id.
    pub fn select_composition(&self, text: &str) -> (CompositionId, f64) {
        let scores = self.predict_scores(text);
        let mut best = 0;
        for (i, score) in scores.iter().enumerate() {
            let better = *score > scores[best]
                || (*score == scores[best] && self.composition_ids[i] < self.composition_ids[best]);
            if better {
                best = i;
            }
        }
        (self.composition_ids[best], scores[best])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let sparse = SparseModel {
            space_fingerprint: self.space_fingerprint.clone(),
            composition_ids: self.composition_ids.clone(),
            dim: self.dim,
            weights: self
                .weights
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(i, v)| (i, *v))
                        .collect()
                })
                .collect(),
            bias: self.bias.clone(),
        };
        fs::write(path, serde_json::to_string(&sparse)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sparse: SparseModel = serde_json::from_str(&fs::read_to_string(path)?)?;
        if sparse.weights.len() != sparse.composition_ids.len()
            || sparse.bias.len() != sparse.composition_ids.len()
        {
            return Err(CoreError::Predictor("model shape mismatch".into()));
        }
        let mut weights = vec![vec![0.0; sparse.dim]; sparse.weights.len()];
        for (row, entries) in weights.iter_mut().zip(&sparse.weights) {
            let mut last: Option<usize> = None;
            for (i, v) in entries {
                if *i >= sparse.dim || last.is_some_and(|l| l >= *i) {
                    return Err(CoreError::Predictor(
                        "model weight indices must be ascending and within dim".into(),
                    ));
                }
                last = Some(*i);
                row[*i] = *v;
            }
        }
        Ok(PredictorModel {
            space_fingerprint: sparse.space_fingerprint,
            composition_ids: sparse.composition_ids,
            dim: sparse.dim,
            weights,
            bias: sparse.bias,
        })
    }
}

/// Summed BCE over all (instance, composition) pairs.
fn dataset_loss(model: &PredictorModel, features: &[Vec<(usize, f64)>], targets: &[Vec<bool>]) -> f64 {
    let mut loss = 0.0;
    for (x, target_row) in features.iter().zip(targets) {
        for (j, y) in target_row.iter().enumerate() {
            let z: f64 = model.bias[j]
                + x.iter().map(|(i, v)| model.weights[j][*i] * v).sum::<f64>();
            loss += bce_from_logit(z, if *y { 1.0 } else { 0.0 });
        }
    }
    loss
}

/// Train from a correctness matrix: targets are the multi-hot correctness
/// rows (all-zero rows are kept). Returns the model and the full-dataset loss
/// after each epoch.
pub fn train(
    matrix: &LabelMatrix,
    texts: &[&str],
    space: &CompositionSpace,
    config: &TrainConfig,
) -> Result<(PredictorModel, Vec<f64>)> {
    if texts.len() != matrix.rows() {
        return Err(CoreError::Predictor(
            "texts/matrix row count mismatch".into(),
        ));
    }
    if matrix.rows() == 0 || matrix.columns() == 0 {
        return Err(CoreError::Predictor("empty training matrix".into()));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(CoreError::Predictor(
            "batch_size and epochs must be positive".into(),
        ));
    }
    let features: Vec<Vec<(usize, f64)>> =
        texts.iter().map(|t| featurize(t, config.dim)).collect();
    let targets: Vec<Vec<bool>> = (0..matrix.rows()).map(|r| matrix.correctness_row(r)).collect();
    train_on(
        features,
        targets,
        matrix.composition_ids.clone(),
        space.fingerprint(),
        config,
    )
}

fn train_on(
    features: Vec<Vec<(usize, f64)>>,
    targets: Vec<Vec<bool>>,
    composition_ids: Vec<CompositionId>,
    space_fingerprint: String,
    config: &TrainConfig,
) -> Result<(PredictorModel, Vec<f64>)> {
    let k = composition_ids.len();
    let mut model = PredictorModel {
        space_fingerprint,
        composition_ids,
        dim: config.dim,
        weights: vec![vec![0.0; config.dim]; k],
        bias: vec![0.0; k],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let scale = config.learning_rate / batch.len() as f64;
            for &row in batch {
                let x = &features[row];
                for j in 0..k {
                    let z: f64 = model.bias[j]
                        + x.iter().map(|(i, v)| model.weights[j][*i] * v).sum::<f64>();
                    let error = sigmoid(z) - if targets[row][j] { 1.0 } else { 0.0 };
                    let step = scale * error;
                    for (i, v) in x {
                        model.weights[j][*i] -= step * v;
                    }
                    model.bias[j] -= step;
                }
            }
        }
        trace.push(dataset_loss(&model, &features, &targets));
    }
    Ok((model, trace))
}

/// Compare the analytic full-batch gradient against central differences at a
/// small random parameter point. Returns the largest absolute deviation over
/// `probes` sampled parameters (weights touched by the data, plus biases).
pub fn gradient_check(
    features: &[Vec<(usize, f64)>],
    targets: &[Vec<bool>],
    dim: usize,
    probes: usize,
    seed: u64,
) -> f64 {
    use rand::Rng;
    let k = targets.first().map(|t| t.len()).unwrap_or(0);
    assert!(k > 0 && !features.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut model = PredictorModel {
        space_fingerprint: String::new(),
        composition_ids: (0..k as u64).map(CompositionId).collect(),
        dim,
        weights: vec![vec![0.0; dim]; k],
        bias: vec![0.0; k],
    };
    for row in &mut model.weights {
        for (i, _) in features.iter().flat_map(|f| f.iter()) {
            row[*i] = rng.gen_range(-0.5..0.5);
        }
    }
    for b in &mut model.bias {
        *b = rng.gen_range(-0.5..0.5);
    }

    // Analytic gradient.
    let mut grad_w = vec![vec![0.0; dim]; k];
    let mut grad_b = vec![0.0; k];
    for (x, target_row) in features.iter().zip(targets) {
        for j in 0..k {
            let z: f64 =
                model.bias[j] + x.iter().map(|(i, v)| model.weights[j][*i] * v).sum::<f64>();
            let error = sigmoid(z) - if target_row[j] { 1.0 } else { 0.0 };
            for (i, v) in x {
                grad_w[j][*i] += error * v;
            }
            grad_b[j] += error;
        }
    }

    let mut active: Vec<usize> = features
        .iter()
        .flat_map(|f| f.iter().map(|(i, _)| *i))
        .collect();
    active.sort_unstable();
    active.dedup();

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let j = rng.gen_range(0..k);
        let probe_bias = rng.gen_bool(0.1);
        let numeric = if probe_bias {
            let original = model.bias[j];
            model.bias[j] = original + h;
            let up = dataset_loss(&model, features, targets);
            model.bias[j] = original - h;
            let down = dataset_loss(&model, features, targets);
            model.bias[j] = original;
            (up - down) / (2.0 * h)
        } else {
            let i = active[rng.gen_range(0..active.len())];
            let original = model.weights[j][i];
            model.weights[j][i] = original + h;
            let up = dataset_loss(&model, features, targets);
            model.weights[j][i] = original - h;
            let down = dataset_loss(&model, features, targets);
            model.weights[j][i] = original;
            let analytic = grad_w[j][i];
            worst = worst.max((analytic - (up - down) / (2.0 * h)).abs());
            continue;
        };
        worst = worst.max((grad_b[j] - numeric).abs());
    }
    worst
}
