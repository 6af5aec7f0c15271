//! Batching, losses and dev-based model selection shared by all trainers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Example;
use crate::diffkit::{argmax, softmax, softmax_backward, softmax_cross_entropy, Adadelta, AdadeltaConfig};
use crate::encoder::{EncoderConfig, EncoderKind, TokenSequence, Vocabulary};
use crate::error::{Error, Result};
use crate::glc::CorruptionMatrix;
use crate::model::{HeadKind, ModelParams};

/// RNG streams for the phases of a run, kept apart so that adding or
/// removing one phase leaves the others' randomness unchanged.
pub mod stream {
    pub const CLEAN: u64 = 16;
    pub const WEAK: u64 = 17;
    pub const MERGED: u64 = 18;
    pub const WEAK_MODEL: u64 = 19;
    pub const CORRECTED_MODEL: u64 = 20;
    pub const HYDRA: u64 = 21;
}

pub fn phase_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A tokenized example with its target distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedExample {
    pub seq: TokenSequence,
    pub target: Vec<f64>,
    /// True class when known but hidden from training (weak split only).
    pub gold: Option<usize>,
}

impl EncodedExample {
    pub fn label(&self) -> usize {
        argmax(&self.target)
    }
}

/// Tokenizes `examples`. The recurrent encoder cannot read empty sequences,
/// so those are dropped with a warning.
pub fn encode_examples(
    examples: &[Example],
    vocab: &Vocabulary,
    config: &EncoderConfig,
    num_classes: usize,
) -> Vec<EncodedExample> {
    let mut dropped = 0;
    let out: Vec<EncodedExample> = examples
        .iter()
        .filter_map(|e| {
            let seq = config.tokenize(&e.text, vocab);
            if seq.true_length == 0 && config.kind == EncoderKind::BiLstm {
                dropped += 1;
                return None;
            }
            Some(EncodedExample {
                seq,
                target: e.label.distribution(num_classes),
                gold: None,
            })
        })
        .collect();
    if dropped > 0 {
        log::warn!("dropped {dropped} empty examples for the recurrent encoder");
    }
    out
}

/// Vocabulary over the texts of the training splits.
pub fn build_vocabulary<'a>(splits: impl IntoIterator<Item = &'a [Example]>) -> Vocabulary {
    Vocabulary::build(splits.into_iter().flatten().map(|e| e.text.as_str()))
}

#[derive(Clone, Copy, Debug)]
pub enum LossKind<'a> {
    CrossEntropy,
    /// Prediction pushed through `Cᵀ` before the cross-entropy.
    Corrected(&'a CorruptionMatrix),
}

#[derive(Clone, Copy, Debug)]
pub struct BatchItem<'a> {
    pub example: &'a EncodedExample,
    pub head: HeadKind,
    pub weight: f64,
    pub loss: LossKind<'a>,
}

impl<'a> BatchItem<'a> {
    pub fn new(example: &'a EncodedExample, head: HeadKind) -> Self {
        BatchItem {
            example,
            head,
            weight: 1.0,
            loss: LossKind::CrossEntropy,
        }
    }

    pub fn weighted(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_loss(mut self, loss: LossKind<'a>) -> Self {
        self.loss = loss;
        self
    }
}

/// Loss and its gradient w.r.t. the logits.
pub fn logits_loss(logits: &[f64], target: &[f64], loss: LossKind<'_>) -> Result<(f64, Vec<f64>)> {
    if logits.len() != target.len() {
        return Err(Error::shape(logits.len(), target.len()));
    }
    match loss {
        LossKind::CrossEntropy => {
            let (l, _, g) = softmax_cross_entropy(logits, target);
            Ok((l, g))
        }
        LossKind::Corrected(c) => {
            let p = softmax(logits);
            let (l, dp) = c.corrected_loss(&p, target)?;
            Ok((l, softmax_backward(&p, &dp)))
        }
    }
}

/// Unweighted loss of one example.
pub fn example_loss(model: &ModelParams, ex: &EncodedExample, head: HeadKind, loss: LossKind<'_>) -> Result<f64> {
    let feature = model.encoder.encode(&ex.seq)?;
    let logits = model.head(head).forward(&feature);
    Ok(logits_loss(&logits, &ex.target, loss)?.0)
}

/// `Σ weight·loss` over the items, without gradients.
pub fn batch_loss(model: &ModelParams, items: &[BatchItem<'_>]) -> Result<f64> {
    let mut total = 0.0;
    for it in items {
        total += it.weight * example_loss(model, it.example, it.head, it.loss)?;
    }
    Ok(total)
}

/// `Σ weight·loss` over the items; gradients are accumulated into `model`.
pub fn accumulate(model: &mut ModelParams, items: &[BatchItem<'_>]) -> Result<f64> {
    let mut total = 0.0;
    for it in items {
        let (feature, cache) = model.encoder.forward(&it.example.seq)?;
        let logits = model.head(it.head).forward(&feature);
        let (loss, mut dz) = logits_loss(&logits, &it.example.target, it.loss)?;
        total += it.weight * loss;
        dz.iter_mut().for_each(|g| *g *= it.weight);
        let dfeature = model.head_mut(it.head).backward(&feature, &dz);
        model.encoder.backward(&it.example.seq, &cache, &dfeature);
    }
    Ok(total)
}

/// Clean-head predictions.
pub fn predict_all(model: &ModelParams, examples: &[EncodedExample]) -> Result<Vec<usize>> {
    examples
        .par_iter()
        .map(|e| model.predict(&e.seq).map(|(c, _)| c))
        .collect()
}

/// Fraction of examples whose clean-head prediction matches the target's argmax.
pub fn accuracy(model: &ModelParams, examples: &[EncodedExample]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let preds = predict_all(model, examples)?;
    let hits = preds.iter().zip(examples).filter(|(p, e)| **p == e.label()).count();
    Ok(hits as f64 / examples.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without a dev improvement; 0 disables.
    pub patience: usize,
    pub optimizer: AdadeltaConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            patience: 8,
            optimizer: AdadeltaConfig::default(),
        }
    }
}

/// Keeps the parameters with the best dev accuracy; earlier wins ties.
#[derive(Clone, Debug, Default)]
pub struct DevSelector {
    pub history: Vec<f64>,
    best_acc: Option<f64>,
    best: Option<ModelParams>,
    since_best: usize,
}

impl DevSelector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the dev accuracy of `model`; returns whether it improved.
    pub fn observe(&mut self, model: &ModelParams, dev: &[EncodedExample]) -> Result<bool> {
        let acc = accuracy(model, dev)?;
        self.history.push(acc);
        if self.best_acc.is_none_or(|b| acc > b) {
            self.best_acc = Some(acc);
            self.best = Some(model.clone());
            self.since_best = 0;
            Ok(true)
        } else {
            self.since_best += 1;
            Ok(false)
        }
    }

    pub fn best_accuracy(&self) -> Option<f64> {
        self.best_acc
    }

    pub fn since_best(&self) -> usize {
        self.since_best
    }

    /// The best observed parameters, or `current` if nothing was observed.
    pub fn finish(self, current: ModelParams) -> ModelParams {
        self.best.unwrap_or(current)
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: ModelParams,
    pub dev_history: Vec<f64>,
    pub best_dev: f64,
    pub train_losses: Vec<f64>,
}

/// Minibatch training over `n` items produced by `item`. Each batch minimizes
/// the item-weighted loss divided by the batch size; the dev-best model is
/// returned.
pub fn fit<'a>(
    mut model: ModelParams,
    n: usize,
    item: impl Fn(usize) -> BatchItem<'a>,
    dev: &[EncodedExample],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<FitOutcome> {
    if config.batch_size == 0 {
        return Err(Error::Validation("batch size must be positive".into()));
    }
    let mut opt = Adadelta::new(config.optimizer.clone());
    let mut selector = DevSelector::new();
    let mut train_losses = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..config.epochs {
        if n == 0 {
            break;
        }
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let scale = 1.0 / chunk.len() as f64;
            let items: Vec<BatchItem<'a>> = chunk
                .iter()
                .map(|&i| {
                    let it = item(i);
                    it.weighted(it.weight * scale)
                })
                .collect();
            epoch_loss += accumulate(&mut model, &items)?;
            opt.step(&mut model)?;
        }
        train_losses.push(epoch_loss / order.len().div_ceil(config.batch_size) as f64);
        selector.observe(&model, dev)?;
        if config.patience > 0 && selector.since_best() >= config.patience {
            break;
        }
    }
    let dev_history = selector.history.clone();
    let best_dev = match selector.best_accuracy() {
        Some(acc) => acc,
        None => accuracy(&model, dev)?,
    };
    Ok(FitOutcome {
        model: selector.finish(model),
        dev_history,
        best_dev,
        train_losses,
    })
}
