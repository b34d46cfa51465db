use std::collections::BTreeMap;

use log::debug;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{JointModel, NeuralError};
use crate::corpus::SpecificityLabel;
use crate::eval::{quadratic_weighted_kappa, ConfusionMatrix};
use crate::ml::{argmax, relative_error};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointConfig {
    /// LSTM hidden size.
    pub hidden: usize,
    /// Output size of the handcrafted-feature layer.
    pub fc: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a held-out QWK improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    /// Characters kept per turn; the tail is cut.
    pub max_len: usize,
    pub strict_charset: bool,
    pub seed: u64,
}

impl Default for JointConfig {
    fn default() -> Self {
        JointConfig {
            hidden: 100,
            fc: 100,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 30,
            patience: 5,
            validation_fraction: 0.1,
            max_len: 2000,
            strict_charset: false,
            seed: 0,
        }
    }
}

pub const HIDDEN_RANGE: std::ops::RangeInclusive<usize> = 50..=200;

impl JointConfig {
    /// Structural checks only. Hidden sizes below the training range are
    /// accepted here so that small models can be gradient-checked.
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |msg: String| Err(NeuralError::Config(msg));
        if self.hidden == 0 || self.fc == 0 {
            return bad("hidden and fc sizes must be positive".into());
        }
        if self.hidden > *HIDDEN_RANGE.end() {
            return bad(format!("hidden size {} exceeds {}", self.hidden, HIDDEN_RANGE.end()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.max_len == 0 {
            return bad("batch size and max length must be positive".into());
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return bad(format!("validation fraction {} not in [0, 0.5)", self.validation_fraction));
        }
        Ok(())
    }

    pub fn validate_for_training(&self) -> Result<(), NeuralError> {
        self.validate()?;
        if !HIDDEN_RANGE.contains(&self.hidden) {
            return Err(NeuralError::Config(format!(
                "hidden size {} outside {:?}",
                self.hidden, HIDDEN_RANGE
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training cross-entropy; epoch 0 is the untrained model.
    pub train_loss: f64,
    pub validation_qwk: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Indices held out for early stopping: about `fraction` of each label,
/// at least one per label that has two or more samples.
fn validation_split(labels: &[usize], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    if fraction <= 0.0 {
        return ((0..labels.len()).collect(), Vec::new());
    }
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let mut train = Vec::new();
    let mut held = Vec::new();
    for idx in by_label.values_mut() {
        idx.shuffle(rng);
        let n = if idx.len() >= 2 {
            ((idx.len() as f64 * fraction).round() as usize).max(1)
        } else {
            0
        };
        held.extend_from_slice(&idx[..n]);
        train.extend_from_slice(&idx[n..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    (train, held)
}

/// Trains a fresh model with Adam on mini-batches. Batch order and
/// initialization come from `config.seed`. When a validation split exists,
/// training stops after `patience` epochs without a QWK improvement and the
/// best epoch's parameters are restored.
pub fn train_joint(
    texts: &[&str],
    hand: &[Vec<f64>],
    labels: &[SpecificityLabel],
    hand_names: &[String],
    config: &JointConfig,
) -> Result<(JointModel, TrainingHistory), NeuralError> {
    config.validate_for_training()?;
    if texts.is_empty() {
        return Err(NeuralError::EmptyTrainingSet);
    }
    if texts.len() != hand.len() || texts.len() != labels.len() {
        return Err(NeuralError::LengthMismatch);
    }
    let mut model = JointModel::new(config.clone(), hand_names.to_vec())?;
    for row in hand {
        if row.len() != hand_names.len() {
            return Err(NeuralError::SchemaMismatch {
                expected: hand_names.len(),
                found: row.len(),
            });
        }
    }
    let y: Vec<usize> = labels.iter().map(|l| l.ordinal()).collect();
    let seqs: Vec<Vec<Option<usize>>> = texts.iter().map(|t| model.encode(t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9));
    let (train_idx, val_idx) = validation_split(&y, config.validation_fraction, &mut rng);

    let mean_loss = |m: &JointModel| -> f64 {
        let total: f64 = train_idx
            .iter()
            .map(|&i| -m.forward_cached(seqs[i].clone(), &hand[i]).probs[y[i]].max(f64::MIN_POSITIVE).ln())
            .sum();
        total / train_idx.len() as f64
    };
    let val_qwk = |m: &JointModel| -> Option<f64> {
        if val_idx.is_empty() {
            return None;
        }
        let pred: Vec<usize> = val_idx
            .iter()
            .map(|&i| argmax(&m.forward_cached(seqs[i].clone(), &hand[i]).probs))
            .collect();
        let truth: Vec<usize> = val_idx.iter().map(|&i| y[i]).collect();
        let kappa = ConfusionMatrix::from_ordinals(&truth, &pred, 3)
            .ok()
            .and_then(|cm| quadratic_weighted_kappa(&cm).ok());
        // Predictions on a single label score as chance.
        Some(kappa.unwrap_or(0.0))
    };

    let mut history = TrainingHistory {
        epochs: vec![EpochRecord {
            epoch: 0,
            train_loss: mean_loss(&model),
            validation_qwk: val_qwk(&model),
        }],
        best_epoch: 0,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stale = 0;
    let mut adam = Adam::new(model.params.len(), config.learning_rate);
    let mut order = train_idx.clone();
    let mut grad = vec![0.0; model.params.len()];
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let cache = model.forward_cached(seqs[i].clone(), &hand[i]);
                epoch_loss += model.backward(&cache, y[i], &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut model.params, &grad);
        }
        let qwk = val_qwk(&model);
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / order.len() as f64,
            validation_qwk: qwk,
        });
        debug!("epoch {epoch}: loss {:.4} qwk {:?}", epoch_loss / order.len() as f64, qwk);
        let Some(q) = qwk else {
            history.best_epoch = epoch;
            continue;
        };
        if best.as_ref().is_none_or(|(b, _)| q > *b) {
            best = Some((q, model.params.clone()));
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok((model, history))
}

/// Which parameters a gradient check samples from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    All,
    /// Handcrafted layer and softmax head only; the LSTM is left untouched.
    NonRecurrent,
}

/// Largest relative error between backpropagated gradients and central
/// differences (step `h`) over `n_checks` randomly drawn parameters.
pub fn gradient_check(
    model: &JointModel,
    samples: &[(&str, &[f64], usize)],
    group: ParamGroup,
    n_checks: usize,
    h: f64,
    seed: u64,
) -> Result<f64, NeuralError> {
    let (_, grad) = model.loss_and_gradient(samples)?;
    let start = match group {
        ParamGroup::All => 0,
        ParamGroup::NonRecurrent => model.layout().non_recurrent_start(),
    };
    let pool = model.params.len() - start;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for offset in sample(&mut rng, pool, n_checks.min(pool)) {
        let i = start + offset;
        let orig = probe.params[i];
        probe.params[i] = orig + h;
        let plus = probe.loss(samples);
        probe.params[i] = orig - h;
        let minus = probe.loss(samples);
        probe.params[i] = orig;
        worst = worst.max(relative_error(grad[i], (plus - minus) / (2.0 * h)));
    }
    Ok(worst)
}
