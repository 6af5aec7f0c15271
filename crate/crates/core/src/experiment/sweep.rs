use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{weak_counts, CorpusSource, ExperimentSpec};
use crate::baselines::{train_method, Method};
use crate::corpus::{
    build_dataset, generate_synthetic, read_corpus_dir, read_records, BuildOptions, Corpus, Dataset, Intent, SplitSizes,
};
use crate::encoder::{EncoderKind, Vocabulary};
use crate::error::{Error, Result};
use crate::train::build_vocabulary;
use crate::weaklabel::{as_label_map, label_intent, WeakLabelAssignment};

/// Training setting of a standard sweep cell.
pub const STANDARD: &str = "standard";

/// One trained (cell, seed) pair, or the reason it failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Method name.
    pub kind: String,
    /// `standard`, or the transfer setting.
    pub setting: String,
    pub encoder: EncoderKind,
    pub intent: Intent,
    pub clean_ratio: f64,
    pub weak_fraction: f64,
    pub clean_count: usize,
    pub weak_count: usize,
    pub seed: u64,
    pub dev_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub alpha: Option<f64>,
    pub weak_label_acc: Option<f64>,
    pub corrected_label_acc: Option<f64>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Messages with gold labels plus weak labels for one intent.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub corpus: Corpus,
    pub weak_labels: BTreeMap<String, bool>,
}

/// Generates or reads the corpus and its weak labels.
pub fn load_inputs(source: &CorpusSource, intent: Intent) -> Result<Inputs> {
    let corpus = match source {
        CorpusSource::Synthetic(s) => generate_synthetic(s)?,
        CorpusSource::Files { dir, .. } => read_corpus_dir(dir)?,
    };
    let assignments = match source {
        CorpusSource::Files {
            weak_labels: Some(path),
            ..
        } => {
            let all: Vec<WeakLabelAssignment> = read_records(path)?;
            all.into_iter().filter(|a| a.intent == intent).collect()
        }
        _ => label_intent(&corpus, intent),
    };
    Ok(Inputs {
        weak_labels: as_label_map(&assignments),
        corpus,
    })
}

/// Split sizes and dataset of one (clean ratio, weak fraction) cell.
pub fn cell_dataset(inputs: &Inputs, spec: &ExperimentSpec, clean_ratio: f64, weak_fraction: f64) -> Result<Dataset> {
    let sizes = SplitSizes::from_ratio(clean_ratio, spec.weak_size, spec.dev_size, spec.test_size)?;
    let opts = BuildOptions {
        natural_prevalence_eval: spec.natural_prevalence_eval,
    };
    let full = build_dataset(
        &inputs.corpus,
        &inputs.weak_labels,
        spec.intent,
        &sizes,
        &opts,
        spec.split_seed,
    )?;
    if weak_fraction >= 1.0 {
        return Ok(full);
    }
    let weak = weak_counts(spec.weak_size, &[weak_fraction])[0];
    full.subsample(sizes.clean, weak, spec.split_seed)
}

/// Training vocabulary of a dataset: every token of its clean and weak splits.
pub fn dataset_vocabulary(dataset: &Dataset) -> Vocabulary {
    build_vocabulary([dataset.clean(), dataset.weak()])
}

struct Cell {
    clean_ratio: f64,
    weak_fraction: f64,
    data: std::result::Result<(Dataset, Vocabulary), String>,
}

fn record(spec: &ExperimentSpec, cell: &Cell, method: Method, seed: u64) -> RunRecord {
    let mut rec = RunRecord {
        kind: method.name().to_string(),
        setting: STANDARD.to_string(),
        encoder: spec.encoder,
        intent: spec.intent,
        clean_ratio: cell.clean_ratio,
        weak_fraction: cell.weak_fraction,
        clean_count: 0,
        weak_count: 0,
        seed,
        dev_acc: None,
        test_acc: None,
        alpha: None,
        weak_label_acc: None,
        corrected_label_acc: None,
        error: None,
    };
    let (dataset, vocab) = match &cell.data {
        Ok(d) => d,
        Err(e) => {
            rec.error = Some(e.clone());
            return rec;
        }
    };
    rec.clean_count = dataset.clean_len();
    rec.weak_count = dataset.weak_len();
    match train_method(method, dataset, vocab, &spec.method_config(), seed) {
        Ok(out) => {
            rec.dev_acc = Some(out.dev_accuracy);
            rec.test_acc = Some(out.test_accuracy);
            rec.alpha = out.alpha;
            rec.weak_label_acc = out.weak_label_accuracy;
            rec.corrected_label_acc = out.corrected_label_accuracy;
        }
        Err(e) => {
            log::error!("{method} ratio {} seed {seed}: {e}", cell.clean_ratio);
            rec.error = Some(e.to_string());
        }
    }
    rec
}

/// Trains every (clean ratio, weak fraction, method, seed) combination of
/// `spec`, running up to `spec.jobs` of them at once.
///
/// Failures are recorded in the returned records and do not stop the sweep.
/// Records are ordered by clean ratio, weak fraction, method and seed, as
/// listed in the spec.
pub fn run_sweep(spec: &ExperimentSpec, inputs: &Inputs) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &clean_ratio in &spec.clean_ratios {
        for &weak_fraction in &spec.weak_fractions {
            let data = cell_dataset(inputs, spec, clean_ratio, weak_fraction)
                .map(|d| {
                    let v = dataset_vocabulary(&d);
                    (d, v)
                })
                .map_err(|e| {
                    log::error!("dataset for ratio {clean_ratio}, weak fraction {weak_fraction}: {e}");
                    e.to_string()
                });
            cells.push(Cell {
                clean_ratio,
                weak_fraction,
                data,
            });
        }
    }
    let work: Vec<(&Cell, Method, u64)> = cells
        .iter()
        .flat_map(|c| {
            spec.methods
                .iter()
                .flat_map(move |&m| spec.seeds.iter().map(move |&s| (c, m, s)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start {} workers: {e}", spec.jobs)))?;
    Ok(pool.install(|| {
        work.par_iter()
            .map(|&(cell, method, seed)| record(spec, cell, method, seed))
            .collect()
    }))
}
