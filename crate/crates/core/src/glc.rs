//! Gold loss correction: a weak-only model `f`, the corruption matrix `C`
//! estimated from it on clean data, a corrected model `f′`, and the
//! corrected weak set.

use serde::{Deserialize, Serialize};

use crate::diffkit::{argmax, NORMALIZATION_TOLERANCE};
use crate::error::{Error, Result};
use crate::model::{HeadKind, ModelParams};
use crate::train::{fit, phase_rng, stream, BatchItem, EncodedExample, FitOutcome, LossKind, TrainConfig};

/// Lower clamp applied before `C` enters a log.
pub const MIN_ENTRY: f64 = 1e-6;

/// Row `l`, column `r` approximates `p(weak = r | true = l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionMatrix {
    entries: Vec<Vec<f64>>,
}

impl CorruptionMatrix {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let l = entries.len();
        if l == 0 {
            return Err(Error::Validation("empty corruption matrix".into()));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != l {
                return Err(Error::shape(
                    format!("{l} columns"),
                    format!("{} in row {i}", row.len()),
                ));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
                return Err(Error::Validation(format!("row {i} has entries outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::Validation(format!("row {i} sums to {sum}")));
            }
        }
        Ok(CorruptionMatrix { entries })
    }

    pub fn identity(num_classes: usize) -> Self {
        CorruptionMatrix {
            entries: (0..num_classes)
                .map(|l| (0..num_classes).map(|r| f64::from(u8::from(l == r))).collect())
                .collect(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn get(&self, l: usize, r: usize) -> f64 {
        self.entries[l][r]
    }

    /// Entries clamped to `[MIN_ENTRY, 1]`, rows renormalized.
    pub fn clamped(&self) -> Self {
        CorruptionMatrix {
            entries: self
                .entries
                .iter()
                .map(|row| normalize(row.iter().map(|v| v.clamp(MIN_ENTRY, 1.0)).collect()))
                .collect(),
        }
    }

    /// `Cᵀ p`: the weak-label distribution implied by a true-label distribution.
    pub fn push_through(&self, p: &[f64]) -> Vec<f64> {
        let l = self.num_classes();
        let mut q = vec![0.0; l];
        for (row, &pl) in self.entries.iter().zip(p) {
            for r in 0..l {
                q[r] += pl * row[r];
            }
        }
        q
    }

    /// `-Σ ỹ log(Cᵀ p)` and its gradient w.r.t. `p`.
    pub fn corrected_loss(&self, p: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        let l = self.num_classes();
        if p.len() != l || target.len() != l {
            return Err(Error::shape(l, format!("{} / {}", p.len(), target.len())));
        }
        let q = self.push_through(p);
        let mut loss = 0.0;
        let mut dq = vec![0.0; l];
        for r in 0..l {
            if target[r] > 0.0 {
                loss -= target[r] * q[r].ln();
                dq[r] = -target[r] / q[r];
            }
        }
        let dp = self
            .entries
            .iter()
            .map(|row| row.iter().zip(&dq).map(|(c, d)| c * d).sum())
            .collect();
        Ok((loss, dp))
    }

    pub fn max_abs_diff(&self, other: &CorruptionMatrix) -> f64 {
        self.entries
            .iter()
            .flatten()
            .zip(other.entries.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn normalize(row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.into_iter().map(|v| v / s).collect()
}

/// Row `l` is the mean predicted distribution over clean examples of class
/// `l`. A class with no examples gets the identity row. Contributions are
/// summed in a canonical order, so the result does not depend on the order
/// of `pairs`.
pub fn estimate_corruption_matrix(pairs: &[(usize, Vec<f64>)], num_classes: usize) -> Result<CorruptionMatrix> {
    let mut buckets: Vec<Vec<&Vec<f64>>> = vec![Vec::new(); num_classes];
    for (label, dist) in pairs {
        if *label >= num_classes || dist.len() != num_classes {
            return Err(Error::shape(
                num_classes,
                format!("label {label}, {} probabilities", dist.len()),
            ));
        }
        buckets[*label].push(dist);
    }
    let mut entries = Vec::with_capacity(num_classes);
    for (l, bucket) in buckets.iter_mut().enumerate() {
        if bucket.is_empty() {
            log::warn!("no clean examples of class {l}; using the identity row");
            let mut row = vec![0.0; num_classes];
            row[l] = 1.0;
            entries.push(row);
            continue;
        }
        bucket.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut row = vec![0.0; num_classes];
        for dist in bucket.iter() {
            for (acc, v) in row.iter_mut().zip(dist.iter()) {
                *acc += v;
            }
        }
        let n = bucket.len() as f64;
        entries.push(normalize(row.into_iter().map(|v| v / n).collect()));
    }
    CorruptionMatrix::new(entries)
}

/// Estimates `C` from the weak model's predictions on the clean set.
pub fn estimate_from_model(f: &ModelParams, clean: &[EncodedExample]) -> Result<CorruptionMatrix> {
    use rayon::prelude::*;
    let pairs: Vec<(usize, Vec<f64>)> = clean
        .par_iter()
        .map(|e| Ok((e.label(), f.distribution(&e.seq, HeadKind::Clean)?)))
        .collect::<Result<_>>()?;
    estimate_corruption_matrix(&pairs, f.num_classes())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlcConfig {
    /// Trainer settings for both `f` and `f′`.
    pub train: TrainConfig,
    /// Emit argmax labels instead of distributions.
    pub hard_labels: bool,
}

/// Plain cross-entropy training on weak labels, dev-selected.
pub fn train_weak_model(
    init: ModelParams,
    weak: &[EncodedExample],
    dev: &[EncodedExample],
    config: &TrainConfig,
    seed: u64,
) -> Result<FitOutcome> {
    if weak.is_empty() {
        return Err(Error::Input("weak set is empty".into()));
    }
    let mut rng = phase_rng(seed, stream::WEAK_MODEL);
    fit(
        init,
        weak.len(),
        |i| BatchItem::new(&weak[i], HeadKind::Clean),
        dev,
        config,
        &mut rng,
    )
}

/// Trains on the clean set with plain cross-entropy and on the weak set with
/// predictions pushed through `Cᵀ`, over uniformly shuffled merged batches.
pub fn train_corrected_model(
    init: ModelParams,
    clean: &[EncodedExample],
    weak: &[EncodedExample],
    c: &CorruptionMatrix,
    dev: &[EncodedExample],
    config: &TrainConfig,
    seed: u64,
) -> Result<FitOutcome> {
    let c = CorruptionMatrix::new(c.entries.clone())?.clamped();
    if c.num_classes() != init.num_classes() {
        return Err(Error::shape(init.num_classes(), c.num_classes()));
    }
    let n = clean.len();
    let mut rng = phase_rng(seed, stream::CORRECTED_MODEL);
    let c = &c;
    fit(
        init,
        n + weak.len(),
        |i| {
            if i < n {
                BatchItem::new(&clean[i], HeadKind::Clean)
            } else {
                BatchItem::new(&weak[i - n], HeadKind::Clean).with_loss(LossKind::Corrected(c))
            }
        },
        dev,
        config,
        &mut rng,
    )
}

/// Replaces each weak target with `f′`'s distribution (or its argmax).
pub fn correct_labels(f_prime: &ModelParams, weak: &[EncodedExample], hard: bool) -> Result<Vec<EncodedExample>> {
    use rayon::prelude::*;
    weak.par_iter()
        .map(|e| {
            let p = f_prime.distribution(&e.seq, HeadKind::Clean)?;
            let target = if hard {
                let mut t = vec![0.0; p.len()];
                t[argmax(&p)] = 1.0;
                t
            } else {
                p
            };
            Ok(EncodedExample {
                seq: e.seq.clone(),
                target,
                gold: e.gold,
            })
        })
        .collect()
}

/// Fraction of examples with known gold whose target argmax matches it.
pub fn label_accuracy(examples: &[EncodedExample]) -> Option<f64> {
    let known: Vec<_> = examples.iter().filter_map(|e| e.gold.map(|g| (e.label(), g))).collect();
    if known.is_empty() {
        return None;
    }
    Some(known.iter().filter(|(a, b)| a == b).count() as f64 / known.len() as f64)
}

#[derive(Clone, Debug)]
pub struct GlcOutcome {
    pub weak_model: FitOutcome,
    pub matrix: CorruptionMatrix,
    pub corrected_model: FitOutcome,
    pub corrected: Vec<EncodedExample>,
}

/// The full correction pipeline from a common initialization.
pub fn run_glc(
    init: &ModelParams,
    clean: &[EncodedExample],
    weak: &[EncodedExample],
    dev: &[EncodedExample],
    config: &GlcConfig,
    seed: u64,
) -> Result<GlcOutcome> {
    let weak_model = train_weak_model(init.clone(), weak, dev, &config.train, seed)?;
    let matrix = estimate_from_model(&weak_model.model, clean)?;
    log::debug!("estimated corruption matrix {:?}", matrix.entries());
    let corrected_model = train_corrected_model(init.clone(), clean, weak, &matrix, dev, &config.train, seed)?;
    let corrected = correct_labels(&corrected_model.model, weak, config.hard_labels)?;
    Ok(GlcOutcome {
        weak_model,
        matrix,
        corrected_model,
        corrected,
    })
}
