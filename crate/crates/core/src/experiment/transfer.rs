use serde::{Deserialize, Serialize};

use super::spec::{CorpusSource, ExperimentSpec};
use super::sweep::{cell_dataset, load_inputs, RunRecord};
use crate::baselines::{summarize, train_method, BaselineKind, Method, MethodConfig, RunOutcome, SeedMetrics};
use crate::corpus::{Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::train::build_vocabulary;

pub const COMBINED: &str = "combined";
pub const CLEAN_ONLY: &str = "clean-only";
pub const TINY_CLEAN: &str = "tiny-clean";
pub const ZERO_SHOT: &str = "zero-shot";

/// Domain A supplies clean, dev and test data; domain B supplies weak labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferSpec {
    /// Domain A settings; its first clean ratio applies.
    pub base: ExperimentSpec,
    pub domain_b: CorpusSource,
    /// Clean examples of the tiny-clean control.
    pub tiny_clean: usize,
}

impl Default for TransferSpec {
    fn default() -> Self {
        TransferSpec::benchmark()
    }
}

impl TransferSpec {
    /// The benchmark corpus as domain A. Domain B is generated with its own
    /// ids and seed, a shifted background vocabulary, and only part of A's
    /// intent markers and topics.
    pub fn benchmark() -> Self {
        let base = ExperimentSpec::benchmark();
        let domain_b = match &base.corpus {
            CorpusSource::Synthetic(a) => CorpusSource::Synthetic(SyntheticSpec {
                background_offset: a.background_offset + a.vocab_size / 2,
                markers_per_intent: a.markers_per_intent * 3 / 5,
                topics_per_intent: a.topics_per_intent / 2,
                domain: "partner".into(),
                seed: a.seed + 1000,
                ..a.clone()
            }),
            other => other.clone(),
        };
        TransferSpec {
            base,
            domain_b,
            tiny_clean: 20,
        }
    }
}

/// Per-seed outcomes of the four transfer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMetrics {
    /// Hydra on A-clean + B-weak, tested on A.
    pub combined: Vec<SeedMetrics>,
    /// Clean baseline on A-clean.
    pub clean_only: Vec<SeedMetrics>,
    /// Clean baseline on a tiny subset of A-clean.
    pub tiny_clean: Vec<SeedMetrics>,
    /// Hydra trained entirely on B, tested on A.
    pub zero_shot: Vec<SeedMetrics>,
}

fn mean_test(xs: &[SeedMetrics]) -> f64 {
    summarize(xs.to_vec()).map(|r| r.mean_test).unwrap_or(f64::NAN)
}

impl TransferMetrics {
    pub fn mean_combined(&self) -> f64 {
        mean_test(&self.combined)
    }

    pub fn mean_clean_only(&self) -> f64 {
        mean_test(&self.clean_only)
    }

    pub fn mean_tiny_clean(&self) -> f64 {
        mean_test(&self.tiny_clean)
    }

    pub fn mean_zero_shot(&self) -> f64 {
        mean_test(&self.zero_shot)
    }

    /// One record per setting and seed.
    pub fn records(&self, template: &RunRecord) -> Vec<RunRecord> {
        let mut out = Vec::new();
        for (setting, method, runs) in [
            (COMBINED, Method::Hydra, &self.combined),
            (CLEAN_ONLY, Method::Baseline(BaselineKind::Clean), &self.clean_only),
            (TINY_CLEAN, Method::Baseline(BaselineKind::Clean), &self.tiny_clean),
            (ZERO_SHOT, Method::Hydra, &self.zero_shot),
        ] {
            for s in runs {
                out.push(RunRecord {
                    kind: method.name().to_string(),
                    setting: setting.to_string(),
                    seed: s.seed,
                    dev_acc: Some(s.dev_accuracy),
                    test_acc: Some(s.test_accuracy),
                    ..template.clone()
                });
            }
        }
        out
    }
}

fn metrics(seed: u64, out: RunOutcome) -> SeedMetrics {
    SeedMetrics {
        seed,
        dev_accuracy: out.dev_accuracy,
        test_accuracy: out.test_accuracy,
    }
}

/// Trains the four transfer settings on datasets `a` and `b` over a shared
/// vocabulary built from A-clean, B-clean and B-weak.
///
/// Only the clean, dev and test splits of `a` and the clean, weak and dev
/// splits of `b` are read.
pub fn run_transfer(
    a: &Dataset,
    b: &Dataset,
    config: &MethodConfig,
    seeds: &[u64],
    tiny_clean: usize,
) -> Result<TransferMetrics> {
    if a.num_classes() != b.num_classes() {
        return Err(Error::Validation(format!(
            "label spaces differ: {} vs {} classes",
            a.num_classes(),
            b.num_classes()
        )));
    }
    if tiny_clean > a.clean_len() {
        return Err(Error::Validation(format!(
            "tiny clean size {tiny_clean} exceeds the {} clean examples of domain A",
            a.clean_len()
        )));
    }
    let vocab = build_vocabulary([a.clean(), b.clean(), b.weak()]);
    let l = a.num_classes();
    let combined = Dataset::with_weak_gold(
        a.clean().to_vec(),
        b.weak().to_vec(),
        a.dev().to_vec(),
        a.test().to_vec(),
        l,
        b.weak_gold().to_vec(),
    )?;
    let a_only = Dataset::new(a.clean().to_vec(), Vec::new(), a.dev().to_vec(), a.test().to_vec(), l)?;
    let b_then_a = Dataset::with_weak_gold(
        b.clean().to_vec(),
        b.weak().to_vec(),
        b.dev().to_vec(),
        a.test().to_vec(),
        l,
        b.weak_gold().to_vec(),
    )?;
    let clean = Method::Baseline(BaselineKind::Clean);
    let mut m = TransferMetrics {
        combined: Vec::new(),
        clean_only: Vec::new(),
        tiny_clean: Vec::new(),
        zero_shot: Vec::new(),
    };
    for &seed in seeds {
        m.combined.push(metrics(
            seed,
            train_method(Method::Hydra, &combined, &vocab, config, seed)?,
        ));
        m.clean_only
            .push(metrics(seed, train_method(clean, &a_only, &vocab, config, seed)?));
        let tiny = a_only.subsample(tiny_clean, 0, seed)?;
        m.tiny_clean
            .push(metrics(seed, train_method(clean, &tiny, &vocab, config, seed)?));
        m.zero_shot.push(metrics(
            seed,
            train_method(Method::Hydra, &b_then_a, &vocab, config, seed)?,
        ));
    }
    Ok(m)
}

/// Builds both domains from `spec` and runs [`run_transfer`].
pub fn run_transfer_spec(spec: &TransferSpec) -> Result<(TransferMetrics, Vec<RunRecord>)> {
    let base = &spec.base;
    base.validate()?;
    let ratio = base.clean_ratios[0];
    let a_inputs = load_inputs(&base.corpus, base.intent)?;
    let b_inputs = load_inputs(&spec.domain_b, base.intent)?;
    let a = cell_dataset(&a_inputs, base, ratio, 1.0)?;
    let b = cell_dataset(&b_inputs, base, ratio, 1.0)?;
    let metrics = run_transfer(&a, &b, &base.method_config(), &base.seeds, spec.tiny_clean)?;
    let template = RunRecord {
        kind: String::new(),
        setting: String::new(),
        encoder: base.encoder,
        intent: base.intent,
        clean_ratio: ratio,
        weak_fraction: 1.0,
        clean_count: a.clean_len(),
        weak_count: b.weak_len(),
        seed: 0,
        dev_acc: None,
        test_acc: None,
        alpha: None,
        weak_label_acc: None,
        corrected_label_acc: None,
        error: None,
    };
    let records = metrics.records(&template);
    Ok((metrics, records))
}
