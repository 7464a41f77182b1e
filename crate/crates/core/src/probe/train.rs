use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{example_loss, example_loss_and_gradient, ProbeConfig, ProbeExample, ProbeModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedProbe {
    pub model: ProbeModel,
    pub best_dev_loss: f64,
    /// Dev loss of the initial, untrained matrix.
    pub initial_dev_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Seeded shuffle of `0..n` cut into `(train, dev, test)` index lists.
pub fn split_examples(n: usize, dev_fraction: f64, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_dev = ((n as f64 * dev_fraction).round() as usize).min(n);
    let n_test = ((n as f64 * test_fraction).round() as usize).min(n - n_dev);
    let test = order.split_off(n - n_test);
    let dev = order.split_off(order.len() - n_dev);
    (order, dev, test)
}

/// Trains a probe on `examples`, holding out `config.dev_fraction` of them
/// for model selection. Snippets longer than `config.max_code_len` words are
/// left out.
pub fn train_probe(examples: &[ProbeExample], config: &ProbeConfig, layer: usize) -> Result<TrainedProbe> {
    let usable: Vec<&ProbeExample> = examples
        .iter()
        .filter(|e| e.n() >= 2 && e.n() <= config.max_code_len)
        .collect();
    if usable.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let (train_idx, dev_idx, _) = split_examples(usable.len(), config.dev_fraction, 0.0, config.seed);
    let train: Vec<&ProbeExample> = train_idx.iter().map(|&i| usable[i]).collect();
    let dev: Vec<&ProbeExample> = dev_idx.iter().map(|&i| usable[i]).collect();
    if train.is_empty() {
        return train_probe_with_dev(&dev, &dev, config, layer);
    }
    let dev = if dev.is_empty() { train.clone() } else { dev };
    train_probe_with_dev(&train, &dev, config, layer)
}

/// Adam state for a flat parameter vector.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    fn new(len: usize, config: &ProbeConfig) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

fn mean_loss(weights: &[f64], rank: usize, examples: &[&ProbeExample]) -> f64 {
    let losses: Vec<f64> = examples
        .par_iter()
        .map(|e| example_loss(weights, rank, e))
        .collect();
    losses.iter().sum::<f64>() / losses.len().max(1) as f64
}

/// Trains on `train` and keeps the matrix with the lowest mean loss on `dev`.
///
/// Updates use Adam on mini-batches; the learning rate is halved after every
/// epoch that fails to improve the dev loss. Per-example gradients may be
/// computed in parallel but are always summed in batch order, so results
/// depend only on the seed.
pub fn train_probe_with_dev(
    train: &[&ProbeExample],
    dev: &[&ProbeExample],
    config: &ProbeConfig,
    layer: usize,
) -> Result<TrainedProbe> {
    let first = train.first().ok_or(Error::EmptyTrainingSet)?;
    if dev.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let d = first.d_model();
    for e in train.iter().chain(dev) {
        if e.d_model() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: e.d_model(),
            });
        }
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let rank = config.rank.clamp(1, d);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = 1.0 / (d as f64).sqrt();
    let mut weights: Vec<f64> = (0..rank * d).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();

    let initial_dev_loss = mean_loss(&weights, rank, dev);
    let mut best_loss = initial_dev_loss;
    let mut best_weights = weights.clone();
    let mut adam = Adam::new(weights.len(), config);
    let mut lr = config.learning_rate;
    let mut halvings = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| example_loss_and_gradient(&weights, rank, train[i]))
                .collect();
            let mut grad = vec![0.0; weights.len()];
            for (loss, g) in &results {
                epoch_loss += loss;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            adam.step(&mut weights, &grad, lr);
        }
        let dev_loss = mean_loss(&weights, rank, dev);
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            dev_loss,
            learning_rate: lr,
        });
        log::debug!("epoch {epoch}: dev loss {dev_loss:.6} (lr {lr:e})");
        if dev_loss < best_loss {
            best_loss = dev_loss;
            best_weights.clone_from(&weights);
        } else {
            if halvings == config.max_halvings {
                break;
            }
            lr /= 2.0;
            halvings += 1;
        }
    }

    let mut model = ProbeModel::new(rank, d, layer, best_weights.iter().map(|&w| w as f32).collect())?;
    model.metadata.best_dev_loss = Some(best_loss);
    Ok(TrainedProbe {
        model,
        best_dev_loss: best_loss,
        initial_dev_loss,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TreeDistanceMatrix;

    fn chain_example(n: usize) -> ProbeExample {
        // Words on a line: h_i = i, gold distance 2|i - j| scaled as a path.
        let states: Vec<f32> = (0..n).flat_map(|i| [i as f32, 0.5]).collect();
        let dist = TreeDistanceMatrix::from_fn(n, |i, j| 2 * i.abs_diff(j) as u32);
        ProbeExample::new("chain", states, dist).unwrap()
    }

    #[test]
    fn split_sizes() {
        let (train, dev, test) = split_examples(100, 0.1, 0.1, 7);
        assert_eq!((train.len(), dev.len(), test.len()), (80, 10, 10));
        let mut all: Vec<_> = train.iter().chain(&dev).chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_examples(100, 0.1, 0.1, 7), (train, dev, test));
        let (t, d, s) = split_examples(1, 0.5, 0.5, 0);
        assert_eq!(t.len() + d.len() + s.len(), 1);
    }

    #[test]
    fn training_never_ends_worse_than_initialization() {
        let example = chain_example(6);
        let config = ProbeConfig {
            rank: 2,
            learning_rate: 0.05,
            max_epochs: 60,
            batch_size: 1,
            ..Default::default()
        };
        let trained = train_probe_with_dev(&[&example], &[&example], &config, 0).unwrap();
        assert!(trained.best_dev_loss <= trained.initial_dev_loss);
        assert!(trained.best_dev_loss < 0.5 * trained.initial_dev_loss);
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let examples: Vec<ProbeExample> = (3..9).map(chain_example).collect();
        let config = ProbeConfig {
            max_epochs: 5,
            batch_size: 2,
            seed: 11,
            ..Default::default()
        };
        let a = train_probe(&examples, &config, 1).unwrap();
        let b = train_probe(&examples, &config, 1).unwrap();
        assert_eq!(a.model.weights(), b.model.weights());
        assert_eq!(a.model.layer, 1);
    }

    #[test]
    fn empty_training_set() {
        let long = chain_example(5);
        let config = ProbeConfig {
            max_code_len: 4,
            ..Default::default()
        };
        assert!(matches!(
            train_probe(&[long], &config, 0),
            Err(Error::EmptyTrainingSet)
        ));
    }
}
