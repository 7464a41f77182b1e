//! Structural probe: a linear map `B` such that `‖B(h_i - h_j)‖²` approximates
//! the AST path length between words `i` and `j`.

mod eval;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use eval::{eval_predictions, eval_spearman, LengthStat, SpearmanReport, MAX_EVAL_LEN, MIN_EVAL_LEN};
pub use train::{split_examples, train_probe, train_probe_with_dev, EpochRecord, TrainedProbe};

use crate::corpus::TreeDistanceMatrix;
use crate::tensorio::{read_tensor, write_tensor, TensorBlob};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeMetadata {
    pub language: String,
    pub model_name: String,
    pub config_hash: String,
    /// Snippet ids used for training, development and test, when known.
    #[serde(default)]
    pub split: Option<SplitRecord>,
    #[serde(default)]
    pub best_dev_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitRecord {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

/// Trained probe: `rank × d_model` matrix for one hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    rank: usize,
    d_model: usize,
    pub layer: usize,
    weights: Vec<f32>,
    pub metadata: ProbeMetadata,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    layer: usize,
    rank: usize,
    d_model: usize,
    #[serde(flatten)]
    metadata: ProbeMetadata,
}

impl ProbeModel {
    pub fn new(rank: usize, d_model: usize, layer: usize, weights: Vec<f32>) -> Result<Self> {
        if rank == 0 || rank > d_model {
            return Err(Error::InvalidArgument(format!(
                "probe rank {rank} must be in 1..={d_model}"
            )));
        }
        if weights.len() != rank * d_model {
            return Err(Error::DimensionMismatch {
                expected: rank * d_model,
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("probe weights must be finite".into()));
        }
        Ok(ProbeModel {
            rank,
            d_model,
            layer,
            weights,
            metadata: ProbeMetadata::default(),
        })
    }

    /// The `d × d` identity map.
    pub fn identity(d_model: usize, layer: usize) -> Self {
        let mut weights = vec![0.0; d_model * d_model];
        for i in 0..d_model {
            weights[i * d_model + i] = 1.0;
        }
        ProbeModel::new(d_model, d_model, layer, weights).expect("identity is valid")
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub(crate) fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(|&w| w as f64).collect()
    }

    /// Writes `B` as an SCT1 tensor at `path` and metadata to `<path>.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let blob = TensorBlob::new(vec![self.rank as u64, self.d_model as u64], self.weights.clone())?;
        write_tensor(path, &blob)?;
        let sidecar = Sidecar {
            layer: self.layer,
            rank: self.rank,
            d_model: self.d_model,
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("metadata serializes");
        let meta = sidecar_path(path);
        fs::write(&meta, json + "\n").map_err(|e| Error::io(&meta, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let blob = read_tensor(path)?;
        let meta = sidecar_path(path);
        let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", meta.display())))?;
        let [rank, d_model] = blob.dims_usize()[..] else {
            return Err(Error::InvalidArgument(format!(
                "probe tensor must be 2-d, got {:?}",
                blob.dims
            )));
        };
        if rank != sidecar.rank || d_model != sidecar.d_model {
            return Err(Error::InvalidArgument("probe sidecar does not match tensor shape".into()));
        }
        let mut model = ProbeModel::new(rank, d_model, sidecar.layer, blob.data)?;
        model.metadata = sidecar.metadata;
        Ok(model)
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// `‖B(h_i - h_j)‖²`.
pub fn probe_distance(model: &ProbeModel, h_i: &[f32], h_j: &[f32]) -> Result<f64> {
    check_dim(model.d_model, h_i.len())?;
    check_dim(model.d_model, h_j.len())?;
    let diff: Vec<f64> = h_i.iter().zip(h_j).map(|(a, b)| *a as f64 - *b as f64).collect();
    Ok(model
        .weights
        .chunks_exact(model.d_model)
        .map(|row| {
            let z: f64 = row.iter().zip(&diff).map(|(w, d)| *w as f64 * d).sum();
            z * z
        })
        .sum())
}

/// Projects each row of `states` (`n × d`) through `B`, giving `n × rank`.
fn project(weights: &[f64], rank: usize, d: usize, states: &[f32]) -> Vec<f64> {
    let n = states.len() / d;
    let mut z = vec![0.0; n * rank];
    for i in 0..n {
        let h = &states[i * d..(i + 1) * d];
        for r in 0..rank {
            let row = &weights[r * d..(r + 1) * d];
            z[i * rank + r] = row.iter().zip(h).map(|(w, x)| w * *x as f64).sum();
        }
    }
    z
}

fn pairwise_sq(z: &[f64], n: usize, rank: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = z[i * rank..(i + 1) * rank]
                .iter()
                .zip(&z[j * rank..(j + 1) * rank])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

/// Predicted squared distances for every word pair of one snippet layer
/// (`states` is row-major `n × d_model`).
pub fn probe_predict(model: &ProbeModel, states: &[f32]) -> Result<Vec<f64>> {
    if !states.len().is_multiple_of(model.d_model) {
        return Err(Error::DimensionMismatch {
            expected: model.d_model,
            actual: states.len(),
        });
    }
    let n = states.len() / model.d_model;
    let z = project(&model.weights_f64(), model.rank, model.d_model, states);
    Ok(pairwise_sq(&z, n, model.rank))
}

/// Hidden states of one layer of a snippet paired with its gold distances.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeExample {
    pub id: String,
    /// Row-major `n × d_model`.
    pub states: Vec<f32>,
    pub distances: TreeDistanceMatrix,
}

impl ProbeExample {
    pub fn new(id: impl Into<String>, states: Vec<f32>, distances: TreeDistanceMatrix) -> Result<Self> {
        let n = distances.n();
        if n == 0 || !states.len().is_multiple_of(n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: states.len(),
            });
        }
        Ok(ProbeExample {
            id: id.into(),
            states,
            distances,
        })
    }

    pub fn n(&self) -> usize {
        self.distances.n()
    }

    pub fn d_model(&self) -> usize {
        self.states.len() / self.n()
    }
}

/// Probe loss of one snippet, `(1/n²) Σ_{i,j} |d_T(i,j) - ‖B(h_i - h_j)‖²|`
/// over ordered pairs, and its gradient with respect to `B` (row-major
/// `rank × d`).
///
/// With `s_ij = sign(pred_ij - d_T(i,j))` and `z = B h`, the gradient is
/// `(4/n²) Zᵀ (diag(Σ_j s_ij) - S) H`.
pub fn example_loss_and_gradient(
    weights: &[f64],
    rank: usize,
    example: &ProbeExample,
) -> (f64, Vec<f64>) {
    let n = example.n();
    let d = example.d_model();
    let z = project(weights, rank, d, &example.states);
    let pred = pairwise_sq(&z, n, rank);
    let norm = 1.0 / (n * n) as f64;

    let mut loss = 0.0;
    let mut signs = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let diff = pred[i * n + j] - example.distances.get(i, j) as f64;
            loss += diff.abs();
            signs[i * n + j] = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
        }
    }

    // M = (diag(r) - S) H, n × d.
    let mut m = vec![0.0; n * d];
    for i in 0..n {
        let row_sum: f64 = signs[i * n..(i + 1) * n].iter().sum();
        let out = &mut m[i * d..(i + 1) * d];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = row_sum * example.states[i * d + k] as f64;
            for j in 0..n {
                let s = signs[i * n + j];
                if s != 0.0 {
                    acc -= s * example.states[j * d + k] as f64;
                }
            }
            *o = acc;
        }
    }
    // G = 4/n² Zᵀ M, rank × d.
    let mut grad = vec![0.0; rank * d];
    for i in 0..n {
        for r in 0..rank {
            let zr = z[i * rank + r] * 4.0 * norm;
            if zr == 0.0 {
                continue;
            }
            let g = &mut grad[r * d..(r + 1) * d];
            for (gk, mk) in g.iter_mut().zip(&m[i * d..(i + 1) * d]) {
                *gk += zr * mk;
            }
        }
    }
    (loss * norm, grad)
}

/// Probe loss of one snippet for a given `B`.
pub fn example_loss(weights: &[f64], rank: usize, example: &ProbeExample) -> f64 {
    let n = example.n();
    let z = project(weights, rank, example.d_model(), &example.states);
    let pred = pairwise_sq(&z, n, rank);
    let total: f64 = pred
        .iter()
        .zip(example.distances.as_slice())
        .map(|(p, &g)| (p - g as f64).abs())
        .sum();
    total / (n * n) as f64
}

/// Training settings. Defaults follow the usual structural-probe recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Probe rank; clamped to `d_model`.
    pub rank: usize,
    /// Snippets with more words are left out of training.
    pub max_code_len: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Training stops at the first stalled epoch after this many halvings.
    pub max_halvings: usize,
    pub seed: u64,
    /// Fraction of the training examples held out for model selection.
    pub dev_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            rank: 128,
            max_code_len: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 20,
            max_epochs: 40,
            max_halvings: 4,
            seed: 0,
            dev_fraction: 0.1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(rank: usize, d: usize, w: &[f32]) -> ProbeModel {
        ProbeModel::new(rank, d, 0, w.to_vec()).unwrap()
    }

    #[test]
    fn diagonal_probe_distance() {
        let b = model(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert_eq!(probe_distance(&b, &[1.0, 1.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert_eq!(probe_distance(&b, &[0.0, 0.0], &[1.0, 1.0]).unwrap(), 5.0);
        assert_eq!(probe_distance(&b, &[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!(matches!(
            probe_distance(&b, &[1.0], &[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn predict_edge_cases() {
        let b = model(1, 2, &[1.0, -1.0]);
        assert_eq!(probe_predict(&b, &[0.5, 0.5]).unwrap(), vec![0.0]);
        assert_eq!(probe_predict(&b, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap(), vec![0.0; 9]);
        assert!(probe_predict(&b, &[1.0, 2.0, 3.0]).is_err());
        let p = probe_predict(&b, &[0.0, 0.0, 3.0, 1.0]).unwrap();
        assert_eq!(p, vec![0.0, 4.0, 4.0, 0.0]);
    }

    #[test]
    fn invalid_models() {
        assert!(ProbeModel::new(3, 2, 0, vec![0.0; 6]).is_err());
        assert!(ProbeModel::new(1, 2, 0, vec![0.0; 3]).is_err());
        assert!(ProbeModel::new(1, 1, 0, vec![f32::NAN]).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("probe.sct");
        let mut m = model(1, 3, &[0.25, -1.5, 3.0]);
        m.layer = 5;
        m.metadata.model_name = "toy".into();
        m.save(&path).unwrap();
        assert_eq!(ProbeModel::load(&path).unwrap(), m);
    }

    #[test]
    fn scaling_b_scales_distances_quadratically() {
        let states = [0.1f32, 0.4, -0.3, 0.9, 0.5, -0.2];
        let b = model(2, 2, &[1.0, 0.5, -0.25, 2.0]);
        let b3 = model(2, 2, &[3.0, 1.5, -0.75, 6.0]);
        let p = probe_predict(&b, &states).unwrap();
        let p3 = probe_predict(&b3, &states).unwrap();
        for (a, c) in p.iter().zip(&p3) {
            assert!((9.0 * a - c).abs() < 1e-9);
        }
    }
}
