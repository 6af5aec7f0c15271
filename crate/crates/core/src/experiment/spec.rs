use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{Method, MethodConfig};
use crate::corpus::{Intent, SyntheticSpec};
use crate::encoder::{EncoderKind, Truncation};
use crate::error::{Error, Result};

/// Where the messages and weak labels come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    /// Generated on the fly.
    Synthetic(SyntheticSpec),
    /// A corpus directory written by `write_corpus`, with weak labels either
    /// read from a records file or computed by the labeling functions.
    Files { dir: PathBuf, weak_labels: Option<PathBuf> },
}

/// One experiment: a grid of methods × clean ratios × weak fractions, each
/// trained once per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub intent: Intent,
    pub encoder: EncoderKind,
    pub methods: Vec<Method>,
    /// n/(n+N) with N = `weak_size`.
    pub clean_ratios: Vec<f64>,
    /// Size N of the full weak pool.
    pub weak_size: usize,
    /// Fractions of the weak pool actually used; the clean size stays fixed.
    pub weak_fractions: Vec<f64>,
    pub dev_size: usize,
    pub test_size: usize,
    pub seeds: Vec<u64>,
    /// Seed of the split draw, shared by every cell.
    pub split_seed: u64,
    pub natural_prevalence_eval: bool,
    pub corpus: CorpusSource,
    pub training: MethodConfig,
    /// Upper bound on concurrently trained cells.
    pub jobs: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec::benchmark()
    }
}

/// Documented configuration keys accepted by [`ExperimentSpec::set`].
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("intent", "RI, SM or PA"),
    ("encoder", "avg or bilstm"),
    ("methods", "comma-separated method names, e.g. Clean,GLC,Hydra"),
    ("clean_ratios", "comma-separated clean ratios in (0,1]"),
    ("weak_size", "size of the full weak pool"),
    ("weak_fractions", "comma-separated fractions of the weak pool in [0,1]"),
    ("dev_size", "dev examples"),
    ("test_size", "test examples"),
    ("seeds", "comma-separated seeds, or a range a..=b"),
    ("split_seed", "seed of the split draw"),
    (
        "natural_prevalence_eval",
        "draw dev/test at natural prevalence (true/false)",
    ),
    ("jobs", "maximum concurrently trained cells"),
    (
        "corpus_dir",
        "read messages from this directory instead of generating them",
    ),
    ("weak_labels", "weak-label records file used with corpus_dir"),
    ("corpus.threads", "synthetic thread count"),
    ("corpus.vocab_size", "synthetic background vocabulary size"),
    ("corpus.background_offset", "offset into the background word space"),
    ("corpus.markers", "marker words per intent"),
    ("corpus.topics", "topic words per intent"),
    ("corpus.phrases", "intent phrases per positive body"),
    ("corpus.leak", "probability a negative body carries an intent phrase"),
    (
        "corpus.near_miss",
        "probability a negative body carries a near-miss phrase",
    ),
    (
        "corpus.fp_concentration",
        "false-positive multiplier for near-miss negatives",
    ),
    ("corpus.body_len_min", "minimum background tokens per body"),
    ("corpus.body_len_max", "maximum background tokens per body"),
    ("corpus.domain", "id and address namespace"),
    ("corpus.seed", "generator seed"),
    ("embed_dim", "embedding width"),
    ("hidden_dim", "BiLSTM hidden width"),
    ("max_len", "token cap per message"),
    ("truncation", "head or tail"),
    ("epochs", "training epochs"),
    ("batch_size", "minibatch size"),
    (
        "patience",
        "epochs without dev improvement before stopping (0 disables)",
    ),
    ("lr", "Adadelta update multiplier for every trainer"),
    ("rho", "Adadelta decay for every trainer"),
    ("eps", "Adadelta epsilon for every trainer"),
    ("pretrain_epochs", "Pre-Weak pretraining epochs"),
    ("iwt.u", "IWT clean weight"),
    ("iwt.v", "IWT weak weight"),
    ("iwt.alpha", "IWT weak-head weight"),
    ("glc.epochs", "epochs for the weak and corrected models"),
    ("glc.patience", "patience for the weak and corrected models"),
    ("glc.hard_labels", "argmax corrected labels instead of distributions"),
    ("hydra.alpha_grid", "comma-separated weak-loss weights tried per cell"),
    (
        "hydra.lambdas",
        "comma-separated, strictly increasing self-paced thresholds",
    ),
    ("hydra.epochs_per_stage", "epochs per threshold stage"),
    ("hydra.warmup_epochs", "clean-only epochs before self-paced training"),
    ("hydra.batch_half", "clean and weak examples per batch"),
    ("hydra.patience", "stages without dev improvement before stopping"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Input(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Input(format!("invalid value {value:?} for {key}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// `1,2,3` or `1..=5`.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = value.split_once("..=") {
        let (a, b): (u64, u64) = (parse("seeds", a)?, parse("seeds", b)?);
        if a > b {
            return Err(Error::Input(format!("empty seed range {value:?}")));
        }
        return Ok((a..=b).collect());
    }
    parse_list("seeds", value)
}

impl ExperimentSpec {
    /// Calibrated synthetic benchmark: schedule-meeting intent, averaged
    /// embeddings of width 32, 10% clean ratio over 3,600 weak labels and
    /// five seeds.
    pub fn benchmark() -> Self {
        let corpus = SyntheticSpec {
            num_threads: 9000,
            markers_per_intent: 20,
            topics_per_intent: 300,
            phrases_per_positive: 2,
            phrase_leak_rate: 0.1,
            near_miss_rate: 0.3,
            fp_concentration: 2.5,
            seed: 7,
            ..SyntheticSpec::default()
        };
        let mut training = MethodConfig::default();
        training.encoder.embed_dim = 32;
        training.glc.hard_labels = true;
        let mut spec = ExperimentSpec {
            intent: Intent::ScheduleMeeting,
            encoder: EncoderKind::Avg,
            methods: Method::all(),
            clean_ratios: vec![0.1],
            weak_size: 3600,
            weak_fractions: vec![1.0],
            dev_size: 400,
            test_size: 1000,
            seeds: (1..=5).collect(),
            split_seed: 11,
            natural_prevalence_eval: false,
            corpus: CorpusSource::Synthetic(corpus),
            training,
            jobs: 1,
        };
        spec.set_optimizer(|o| o.lr = 3.0);
        spec
    }

    fn set_optimizer(&mut self, f: impl Fn(&mut crate::diffkit::AdadeltaConfig)) {
        f(&mut self.training.train.optimizer);
        f(&mut self.training.glc.train.optimizer);
        f(&mut self.training.hydra.optimizer);
        f(&mut self.training.hydra.glc_config.train.optimizer);
    }

    fn synthetic_mut(&mut self, key: &str) -> Result<&mut SyntheticSpec> {
        match &mut self.corpus {
            CorpusSource::Synthetic(s) => Ok(s),
            CorpusSource::Files { .. } => Err(Error::Input(format!("{key} applies only to generated corpora"))),
        }
    }

    /// Applies one `key = value` override; see [`CONFIG_KEYS`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.training;
        match key {
            "intent" => self.intent = parse(key, v)?,
            "encoder" => self.encoder = parse(key, v)?,
            "methods" => self.methods = parse_list(key, v)?,
            "clean_ratios" | "clean_ratio" => self.clean_ratios = parse_list(key, v)?,
            "weak_size" => self.weak_size = parse(key, v)?,
            "weak_fractions" => self.weak_fractions = parse_list(key, v)?,
            "dev_size" => self.dev_size = parse(key, v)?,
            "test_size" => self.test_size = parse(key, v)?,
            "seeds" => self.seeds = parse_seeds(v)?,
            "split_seed" => self.split_seed = parse(key, v)?,
            "natural_prevalence_eval" => self.natural_prevalence_eval = parse_bool(key, v)?,
            "jobs" => self.jobs = parse(key, v)?,
            "corpus_dir" => {
                let weak_labels = match &self.corpus {
                    CorpusSource::Files { weak_labels, .. } => weak_labels.clone(),
                    CorpusSource::Synthetic(_) => None,
                };
                self.corpus = CorpusSource::Files {
                    dir: PathBuf::from(v),
                    weak_labels,
                };
            }
            "weak_labels" => match &mut self.corpus {
                CorpusSource::Files { weak_labels, .. } => *weak_labels = Some(PathBuf::from(v)),
                CorpusSource::Synthetic(_) => return Err(Error::Input("weak_labels requires corpus_dir".into())),
            },
            "corpus.threads" => self.synthetic_mut(key)?.num_threads = parse(key, v)?,
            "corpus.vocab_size" => self.synthetic_mut(key)?.vocab_size = parse(key, v)?,
            "corpus.background_offset" => self.synthetic_mut(key)?.background_offset = parse(key, v)?,
            "corpus.markers" => self.synthetic_mut(key)?.markers_per_intent = parse(key, v)?,
            "corpus.topics" => self.synthetic_mut(key)?.topics_per_intent = parse(key, v)?,
            "corpus.phrases" => self.synthetic_mut(key)?.phrases_per_positive = parse(key, v)?,
            "corpus.leak" => self.synthetic_mut(key)?.phrase_leak_rate = parse(key, v)?,
            "corpus.near_miss" => self.synthetic_mut(key)?.near_miss_rate = parse(key, v)?,
            "corpus.fp_concentration" => self.synthetic_mut(key)?.fp_concentration = parse(key, v)?,
            "corpus.body_len_min" => self.synthetic_mut(key)?.body_len_min = parse(key, v)?,
            "corpus.body_len_max" => self.synthetic_mut(key)?.body_len_max = parse(key, v)?,
            "corpus.domain" => self.synthetic_mut(key)?.domain = v.to_string(),
            "corpus.seed" => self.synthetic_mut(key)?.seed = parse(key, v)?,
            "embed_dim" => t.encoder.embed_dim = parse(key, v)?,
            "hidden_dim" => t.encoder.hidden_dim = parse(key, v)?,
            "max_len" => t.encoder.max_len = parse(key, v)?,
            "truncation" => {
                t.encoder.truncation = match v.to_ascii_lowercase().as_str() {
                    "head" => Truncation::Head,
                    "tail" => Truncation::Tail,
                    _ => return Err(Error::Input(format!("invalid value {v:?} for {key}"))),
                }
            }
            "epochs" => t.train.epochs = parse(key, v)?,
            "batch_size" => t.train.batch_size = parse(key, v)?,
            "patience" => t.train.patience = parse(key, v)?,
            "lr" => {
                let x: f64 = parse(key, v)?;
                self.set_optimizer(|o| o.lr = x);
            }
            "rho" => {
                let x: f64 = parse(key, v)?;
                self.set_optimizer(|o| o.rho = x);
            }
            "eps" => {
                let x: f64 = parse(key, v)?;
                self.set_optimizer(|o| o.eps = x);
            }
            "pretrain_epochs" => t.pretrain_epochs = parse(key, v)?,
            "iwt.u" => t.iwt.u = parse(key, v)?,
            "iwt.v" => t.iwt.v = parse(key, v)?,
            "iwt.alpha" => t.iwt.alpha = parse(key, v)?,
            "glc.epochs" => t.glc.train.epochs = parse(key, v)?,
            "glc.patience" => t.glc.train.patience = parse(key, v)?,
            "glc.hard_labels" => t.glc.hard_labels = parse_bool(key, v)?,
            "hydra.alpha_grid" => t.hydra.alpha_grid = parse_list(key, v)?,
            "hydra.lambdas" => t.hydra.lambdas = parse_list(key, v)?,
            "hydra.epochs_per_stage" => t.hydra.epochs_per_stage = parse(key, v)?,
            "hydra.warmup_epochs" => t.hydra.warmup_epochs = parse(key, v)?,
            "hydra.batch_half" => t.hydra.batch_half = parse(key, v)?,
            "hydra.patience" => t.hydra.patience = parse(key, v)?,
            _ => return Err(Error::Input(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies overrides in order, so later pairs win.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Method settings with the encoder kind applied.
    pub fn method_config(&self) -> MethodConfig {
        let mut cfg = self.training.clone();
        cfg.encoder.kind = self.encoder;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.clean_ratios.is_empty() || self.weak_fractions.is_empty() {
            return Err(Error::Validation("experiment grid is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Validation("at least one seed is required".into()));
        }
        if let Some(r) = self.clean_ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::Validation(format!("clean ratio must lie in (0,1], got {r}")));
        }
        if let Some(f) = self.weak_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::Validation(format!("weak fraction must lie in [0,1], got {f}")));
        }
        if self.jobs == 0 {
            return Err(Error::Validation("jobs must be at least 1".into()));
        }
        self.training.hydra.validate()?;
        match &self.corpus {
            CorpusSource::Synthetic(s) => s.validate()?,
            CorpusSource::Files { dir, weak_labels } => {
                for p in std::iter::once(dir).chain(weak_labels) {
                    if !p.exists() {
                        return Err(Error::Validation(format!("{} does not exist", p.display())));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Weak-label counts for fractions of a pool of `total`.
pub fn weak_counts(total: usize, fractions: &[f64]) -> Vec<usize> {
    fractions.iter().map(|f| (f * total as f64).round() as usize).collect()
}
