use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{ClassifierModel, ParamGrads, NUM_CLASSES};
use super::vocab::TokenSeq;
use crate::error::{Error, Result};

/// AdamW with a linear warmup / linear decay learning-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 1e-3,
            warmup_steps: 500,
            batch_size: 32,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        Ok(())
    }

    /// Multiplier applied to the base learning rate at optimizer step `step`
    /// (0-based) out of `total` steps.
    pub fn schedule(&self, step: usize, total: usize) -> f64 {
        if step < self.warmup_steps {
            return (step + 1) as f64 / self.warmup_steps as f64;
        }
        let decay_len = total.saturating_sub(self.warmup_steps).max(1);
        (total.saturating_sub(step)) as f64 / decay_len as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean cross-entropy over the epoch, one entry per epoch.
    pub epoch_loss: Vec<f64>,
    pub steps: usize,
}

/// Trains `model` in place on `(sequence, label)` examples.
///
/// Mini-batches are drawn from a per-epoch shuffle seeded by `cfg.seed`, so
/// the same inputs always produce the same parameters.
pub fn train(
    model: &mut ClassifierModel,
    data: &[(TokenSeq, usize)],
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    let mut seen = [false; NUM_CLASSES];
    for (_, label) in data {
        if *label >= NUM_CLASSES {
            return Err(Error::Config(format!("label {label} out of range")));
        }
        seen[*label] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::SingleClass);
    }

    let steps_per_epoch = data.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut adam = AdamState::new(model);
    let mut log = TrainLog::default();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads: Option<ParamGrads> = None;
            for &i in batch {
                let (seq, label) = &data[i];
                let (loss, g) = model.loss_and_grads(seq, *label)?;
                epoch_loss += loss;
                match grads.as_mut() {
                    Some(acc) => acc.add_assign(&g),
                    None => grads = Some(g),
                }
            }
            let Some(grads) = grads else { continue };
            let lr = cfg.learning_rate * cfg.schedule(log.steps, total_steps);
            adam.step(model, &grads, batch.len(), lr, cfg);
            log.steps += 1;
        }
        log.epoch_loss.push(epoch_loss / data.len() as f64);
    }
    if !model.all_finite() {
        return Err(Error::NonFinite("model parameters after training"));
    }
    Ok(log)
}

struct AdamState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    t: i32,
}

impl AdamState {
    fn new(model: &ClassifierModel) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            t: 0,
        }
    }

    fn step(
        &mut self,
        model: &mut ClassifierModel,
        grads: &ParamGrads,
        batch: usize,
        lr: f64,
        cfg: &TrainConfig,
    ) {
        self.t += 1;
        let bias1 = 1.0 - cfg.beta1.powi(self.t);
        let bias2 = 1.0 - cfg.beta2.powi(self.t);
        let scale = 1.0 / batch as f64;
        // Biases (indices 2 and 4) are exempt from weight decay.
        let decays = [true, true, false, true, false];
        for (k, (param, grad)) in model
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .enumerate()
        {
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            for i in 0..param.len() {
                let g = grad[i] * scale;
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let update = (m[i] / bias1) / ((v[i] / bias2).sqrt() + cfg.epsilon);
                if decays[k] {
                    param[i] -= lr * cfg.weight_decay * param[i];
                }
                param[i] -= lr * update;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textmodel::ModelConfig;

    fn toy_data() -> Vec<(TokenSeq, usize)> {
        // Token 2 means class 0, token 3 means class 1; token 4 is noise.
        (0..64)
            .map(|i| {
                let label = i % 2;
                let key = 2 + label;
                let ids = if i % 4 < 2 {
                    vec![key, 4]
                } else {
                    vec![4, key]
                };
                let tokens = ids.iter().map(|id| format!("t{id}")).collect();
                (TokenSeq { ids, tokens }, label)
            })
            .collect()
    }

    fn toy_config() -> TrainConfig {
        TrainConfig {
            epochs: 50,
            warmup_steps: 10,
            batch_size: 8,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    fn small_model(seed: u64) -> ClassifierModel {
        let mut cfg = ModelConfig::new(5);
        cfg.embed_dim = 4;
        cfg.hidden = 8;
        ClassifierModel::new(cfg, seed)
    }

    #[test]
    fn separable_toy_task_is_learned() {
        let data = toy_data();
        let mut m = small_model(1);
        let log = train(&mut m, &data, &toy_config()).unwrap();
        assert_eq!(log.epoch_loss.len(), 50);
        let correct = data
            .iter()
            .filter(|(seq, y)| m.forward(&m.embed(seq).unwrap()).unwrap().class == *y)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.99, "{correct}");
        assert!(log.epoch_loss.last().unwrap() < &log.epoch_loss[0]);
    }

    #[test]
    fn training_is_bit_identical_for_a_fixed_seed() {
        let data = toy_data();
        let (mut a, mut b) = (small_model(9), small_model(9));
        train(&mut a, &data, &toy_config()).unwrap();
        train(&mut b, &data, &toy_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_is_a_config_error() {
        let mut m = small_model(1);
        let cfg = TrainConfig {
            epochs: 0,
            ..toy_config()
        };
        assert!(matches!(
            train(&mut m, &toy_data(), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_class_data_is_rejected() {
        let data: Vec<_> = toy_data().into_iter().filter(|(_, y)| *y == 0).collect();
        let mut m = small_model(1);
        assert!(matches!(
            train(&mut m, &data, &toy_config()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn schedule_warms_up_then_decays_to_zero() {
        let cfg = TrainConfig {
            warmup_steps: 4,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.schedule(0, 12), 0.25);
        assert_eq!(cfg.schedule(3, 12), 1.0);
        assert_eq!(cfg.schedule(4, 12), 1.0);
        assert_eq!(cfg.schedule(8, 12), 0.5);
        assert_eq!(cfg.schedule(12, 12), 0.0);
    }
}
