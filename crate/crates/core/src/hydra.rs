//! Dual-headed model trained with self-paced selection of weak examples.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffkit::{Adadelta, AdadeltaConfig, Sgd};
use crate::error::{Error, Result};
use crate::glc::{run_glc, GlcConfig, GlcOutcome};
use crate::model::{HeadKind, ModelParams};
use crate::train::{
    accumulate, batch_loss, example_loss, phase_rng, stream, BatchItem, DevSelector, EncodedExample, LossKind,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HydraConfig {
    /// Weight of the weak-head loss.
    pub alpha: f64,
    /// Candidate weights tried by [`train_hydra_grid`].
    pub alpha_grid: Vec<f64>,
    /// Self-paced thresholds, strictly increasing.
    pub lambdas: Vec<f64>,
    pub epochs_per_stage: usize,
    pub warmup_epochs: usize,
    /// Each batch holds `batch_half` clean and `batch_half` selected weak examples.
    pub batch_half: usize,
    /// Stages without a dev improvement before stopping; 0 disables.
    pub patience: usize,
    pub optimizer: AdadeltaConfig,
    /// Select weak examples by loss threshold; off admits all of them.
    pub self_paced: bool,
    /// Train on corrected labels; off uses the raw weak labels.
    pub glc: bool,
    pub glc_config: GlcConfig,
}

pub fn default_lambdas() -> Vec<f64> {
    (1..=30).map(|k| k as f64 / 10.0).collect()
}

impl Default for HydraConfig {
    fn default() -> Self {
        HydraConfig {
            alpha: 1.0,
            alpha_grid: vec![0.1, 1.0, 10.0],
            lambdas: default_lambdas(),
            epochs_per_stage: 10,
            warmup_epochs: 5,
            batch_half: 16,
            patience: 3,
            optimizer: AdadeltaConfig::default(),
            self_paced: true,
            glc: true,
            glc_config: GlcConfig::default(),
        }
    }
}

impl HydraConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Validation(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if self.alpha_grid.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::Validation("alpha grid values must be non-negative".into()));
        }
        if self.lambdas.is_empty() || self.lambdas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "lambda schedule must be non-empty and strictly increasing".into(),
            ));
        }
        if self.batch_half == 0 {
            return Err(Error::Validation("batch half-size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean clean cross-entropy through the clean head plus `alpha` times the
/// mean weak cross-entropy through the weak head. Gradients are accumulated
/// into `model`.
pub fn dual_loss(
    model: &mut ModelParams,
    clean: &[&EncodedExample],
    weak: &[&EncodedExample],
    alpha: f64,
) -> Result<f64> {
    let items = dual_items(clean, weak, alpha)?;
    accumulate(model, &items)
}

/// [`dual_loss`] without gradients.
pub fn dual_loss_value(
    model: &ModelParams,
    clean: &[&EncodedExample],
    weak: &[&EncodedExample],
    alpha: f64,
) -> Result<f64> {
    batch_loss(model, &dual_items(clean, weak, alpha)?)
}

fn dual_items<'a>(clean: &[&'a EncodedExample], weak: &[&'a EncodedExample], alpha: f64) -> Result<Vec<BatchItem<'a>>> {
    if clean.is_empty() {
        return Err(Error::Input("clean batch is empty".into()));
    }
    let mut items: Vec<BatchItem<'a>> = clean
        .iter()
        .map(|e| BatchItem::new(e, HeadKind::Clean).weighted(1.0 / clean.len() as f64))
        .collect();
    if alpha != 0.0 {
        items.extend(
            weak.iter()
                .map(|e| BatchItem::new(e, HeadKind::Weak).weighted(alpha / weak.len() as f64)),
        );
    }
    Ok(items)
}

/// `v_i = 1` iff `alpha · loss_i < lambda`, i.e. the loss is strictly below
/// `lambda / alpha`. This minimizes `Σ v_i (alpha · loss_i - lambda)` over
/// binary `v`, excluding ties.
pub fn select_weak(losses: &[f64], lambda: f64, alpha: f64) -> Vec<bool> {
    losses.iter().map(|&l| alpha * l < lambda).collect()
}

/// Weak-head losses against the (corrected) weak targets.
pub fn weak_losses(model: &ModelParams, weak: &[EncodedExample]) -> Result<Vec<f64>> {
    weak.par_iter()
        .map(|e| example_loss(model, e, HeadKind::Weak, LossKind::CrossEntropy))
        .collect()
}

/// `mean clean loss + (1/N) Σ v_i (alpha · weak loss_i - lambda)` over the full training set.
pub fn self_paced_objective(
    model: &ModelParams,
    clean: &[EncodedExample],
    weak: &[EncodedExample],
    v: &[bool],
    lambda: f64,
    alpha: f64,
) -> Result<f64> {
    let refs: Vec<&EncodedExample> = clean.iter().collect();
    let clean_term = batch_loss(
        model,
        &refs
            .iter()
            .map(|e| BatchItem::new(e, HeadKind::Clean).weighted(1.0 / clean.len() as f64))
            .collect::<Vec<_>>(),
    )?;
    let losses = weak_losses(model, weak)?;
    let n = weak.len().max(1) as f64;
    let weak_term: f64 = losses
        .iter()
        .zip(v)
        .filter(|(_, &s)| s)
        .map(|(l, _)| alpha * l - lambda)
        .sum();
    Ok(clean_term + weak_term / n)
}

/// One full-batch gradient step on [`self_paced_objective`] with `v` fixed.
pub fn full_batch_step(
    model: &mut ModelParams,
    clean: &[EncodedExample],
    weak: &[EncodedExample],
    v: &[bool],
    alpha: f64,
    lr: f64,
) -> Result<()> {
    let n = weak.len().max(1) as f64;
    let mut items: Vec<BatchItem<'_>> = clean
        .iter()
        .map(|e| BatchItem::new(e, HeadKind::Clean).weighted(1.0 / clean.len() as f64))
        .collect();
    items.extend(
        weak.iter()
            .zip(v)
            .filter(|(_, &s)| s)
            .map(|(e, _)| BatchItem::new(e, HeadKind::Weak).weighted(alpha / n)),
    );
    accumulate(model, &items)?;
    Sgd { lr }.step(model);
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelfPacedState {
    pub v: Vec<bool>,
    pub lambda: f64,
    pub dev_history: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Warmup,
    SelfPaced,
}

/// One record per warmup epoch or self-paced stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub phase: Phase,
    pub lambda: f64,
    pub selected: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct HydraOutcome {
    pub model: ModelParams,
    pub log: Vec<StageRecord>,
    pub state: SelfPacedState,
    pub best_dev: f64,
    pub alpha: f64,
}

/// Warmup on clean data (both heads fit the clean labels), then alternate between re-selecting weak examples
/// at the current threshold and training on batches of `m` clean examples
/// (drawn with replacement) plus `m` selected weak examples. Returns the
/// dev-best parameters.
pub fn train_self_paced(
    init: ModelParams,
    clean: &[EncodedExample],
    weak: &[EncodedExample],
    dev: &[EncodedExample],
    config: &HydraConfig,
    seed: u64,
) -> Result<HydraOutcome> {
    config.validate()?;
    if clean.is_empty() {
        return Err(Error::Input("hydra needs a non-empty clean set".into()));
    }
    let m = config.batch_half;
    let alpha = config.alpha;
    let mut model = init;
    let mut opt = Adadelta::new(config.optimizer.clone());
    let mut selector = DevSelector::new();
    let mut rng = phase_rng(seed, stream::HYDRA);
    let mut log = Vec::new();

    let clean_refs: Vec<&EncodedExample> = clean.iter().collect();
    let mut order: Vec<usize> = (0..clean.len()).collect();
    // Clean-only epoch; during warmup the weak head also fits the clean
    // labels so that its losses are informative for the first selection.
    let clean_epoch = |model: &mut ModelParams,
                       opt: &mut Adadelta,
                       rng: &mut rand_chacha::ChaCha8Rng,
                       order: &mut Vec<usize>,
                       warmup: bool|
     -> Result<f64> {
        order.shuffle(rng);
        let mut total = 0.0;
        let chunks = order.chunks(m).count();
        for chunk in order.chunks(m) {
            let batch: Vec<&EncodedExample> = chunk.iter().map(|&i| clean_refs[i]).collect();
            let weak_side: &[&EncodedExample] = if warmup { &batch } else { &[] };
            total += dual_loss(model, &batch, weak_side, alpha)?;
            opt.step(model)?;
        }
        Ok(total / chunks as f64)
    };

    for _ in 0..config.warmup_epochs {
        let loss = clean_epoch(&mut model, &mut opt, &mut rng, &mut order, true)?;
        selector.observe(&model, dev)?;
        log.push(StageRecord {
            phase: Phase::Warmup,
            lambda: 0.0,
            selected: 0,
            train_loss: loss,
            dev_accuracy: *selector.history.last().expect("observed"),
        });
    }

    let mut state = SelfPacedState {
        v: vec![false; weak.len()],
        lambda: config.lambdas[0],
        dev_history: Vec::new(),
    };
    let mut stale_stages = 0;
    for &lambda in &config.lambdas {
        state.lambda = lambda;
        state.v = if config.self_paced {
            select_weak(&weak_losses(&model, weak)?, lambda, alpha)
        } else {
            vec![true; weak.len()]
        };
        let selected: Vec<usize> = (0..weak.len()).filter(|&i| state.v[i]).collect();
        if selected.is_empty() {
            log::debug!("no weak example selected at lambda {lambda}");
        }
        let best_before = selector.best_accuracy();
        let mut stage_loss = 0.0;
        for _ in 0..config.epochs_per_stage {
            let loss = if selected.is_empty() {
                clean_epoch(&mut model, &mut opt, &mut rng, &mut order, false)?
            } else {
                let mut sel = selected.clone();
                sel.shuffle(&mut rng);
                let mut total = 0.0;
                let chunks = sel.chunks(m).count();
                for chunk in sel.chunks(m) {
                    let cb: Vec<&EncodedExample> = (0..m).map(|_| &clean[rng.gen_range(0..clean.len())]).collect();
                    let wb: Vec<&EncodedExample> = chunk.iter().map(|&i| &weak[i]).collect();
                    total += dual_loss(&mut model, &cb, &wb, alpha)?;
                    opt.step(&mut model)?;
                }
                total / chunks as f64
            };
            stage_loss += loss;
            selector.observe(&model, dev)?;
        }
        let dev_accuracy = selector.history.last().copied().unwrap_or(0.0);
        state.dev_history.push(dev_accuracy);
        log.push(StageRecord {
            phase: Phase::SelfPaced,
            lambda,
            selected: selected.len(),
            train_loss: stage_loss / config.epochs_per_stage.max(1) as f64,
            dev_accuracy,
        });
        if selector.best_accuracy() > best_before {
            stale_stages = 0;
        } else {
            stale_stages += 1;
            if config.patience > 0 && stale_stages >= config.patience {
                break;
            }
        }
    }
    if config.self_paced && !weak.is_empty() && state.v.iter().all(|s| !s) {
        log::warn!("no weak example was selected at the final threshold; training was clean-only");
    }
    let best_dev = match selector.best_accuracy() {
        Some(a) => a,
        None => crate::train::accuracy(&model, dev)?,
    };
    Ok(HydraOutcome {
        model: selector.finish(model),
        log,
        state,
        best_dev,
        alpha,
    })
}

/// Corrected (or raw) weak targets followed by self-paced training.
pub fn train_hydra(
    init: &ModelParams,
    clean: &[EncodedExample],
    weak: &[EncodedExample],
    dev: &[EncodedExample],
    config: &HydraConfig,
    seed: u64,
) -> Result<(HydraOutcome, Option<GlcOutcome>)> {
    let glc = if config.glc {
        Some(run_glc(init, clean, weak, dev, &config.glc_config, seed)?)
    } else {
        None
    };
    let targets = glc.as_ref().map_or(weak, |g| g.corrected.as_slice());
    let out = train_self_paced(init.clone(), clean, targets, dev, config, seed)?;
    Ok((out, glc))
}

/// Runs [`train_self_paced`] for every alpha in the grid on shared weak
/// targets and keeps the run with the best dev accuracy; earlier grid
/// entries win ties.
pub fn train_hydra_grid(
    init: &ModelParams,
    clean: &[EncodedExample],
    weak: &[EncodedExample],
    dev: &[EncodedExample],
    config: &HydraConfig,
    seed: u64,
) -> Result<(HydraOutcome, Option<GlcOutcome>)> {
    if config.alpha_grid.is_empty() {
        return train_hydra(init, clean, weak, dev, config, seed);
    }
    let glc = if config.glc {
        Some(run_glc(init, clean, weak, dev, &config.glc_config, seed)?)
    } else {
        None
    };
    let targets = glc.as_ref().map_or(weak, |g| g.corrected.as_slice());
    let mut best: Option<HydraOutcome> = None;
    for &alpha in &config.alpha_grid {
        let cfg = HydraConfig {
            alpha,
            ..config.clone()
        };
        let out = train_self_paced(init.clone(), clean, targets, dev, &cfg, seed)?;
        log::debug!("alpha {alpha}: dev {:.4}", out.best_dev);
        if best.as_ref().is_none_or(|b| out.best_dev > b.best_dev) {
            best = Some(out);
        }
    }
    Ok((best.expect("non-empty grid"), glc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_example() {
        let v = select_weak(&[0.05, 0.2, 0.09, 0.31, 0.10], 1.0, 10.0);
        assert_eq!(v, vec![true, false, true, false, false]);
    }

    #[test]
    fn huge_lambda_admits_everything() {
        assert!(select_weak(&[0.0, 3.0, 1e6], 1e12, 1.0).iter().all(|s| *s));
    }

    #[test]
    fn config_validation() {
        assert!(HydraConfig::default().validate().is_ok());
        let bad = HydraConfig {
            lambdas: vec![0.2, 0.2],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = HydraConfig {
            batch_half: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(default_lambdas().len(), 30);
        assert!((default_lambdas()[29] - 3.0).abs() < 1e-12);
    }
}
