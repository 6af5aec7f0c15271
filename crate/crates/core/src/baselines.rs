//! Comparison trainers sharing the encoder and head stack.

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::encoder::{EncoderConfig, Vocabulary};
use crate::error::{Error, Result};
use crate::glc::{estimate_from_model, train_corrected_model, train_weak_model, GlcConfig};
use crate::hydra::{train_hydra_grid, HydraConfig};
use crate::model::{HeadKind, ModelParams};
use crate::train::{
    accuracy, encode_examples, fit, phase_rng, stream, BatchItem, EncodedExample, FitOutcome, TrainConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaselineKind {
    Clean,
    Weak,
    CleanPlusWeak,
    PreWeak,
    #[serde(rename = "IWT")]
    Iwt,
    #[serde(rename = "GLC")]
    Glc,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::Clean,
        BaselineKind::Weak,
        BaselineKind::CleanPlusWeak,
        BaselineKind::PreWeak,
        BaselineKind::Iwt,
        BaselineKind::Glc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Clean => "Clean",
            BaselineKind::Weak => "Weak",
            BaselineKind::CleanPlusWeak => "Clean+Weak",
            BaselineKind::PreWeak => "Pre-Weak",
            BaselineKind::Iwt => "IWT",
            BaselineKind::Glc => "GLC",
        }
    }
}

/// A trainable method: one of the baselines or the full dual-head model.
/// Serialized by its display name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Baseline(BaselineKind),
    Hydra,
    /// Hydra with every weak example admitted at every stage.
    HydraNoSelfPaced,
    /// Hydra trained on the raw weak labels.
    HydraNoGlc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline(k) => k.name(),
            Method::Hydra => "Hydra",
            Method::HydraNoSelfPaced => "Hydra-SPL",
            Method::HydraNoGlc => "Hydra-GLC",
        }
    }

    pub fn all() -> Vec<Method> {
        let mut v: Vec<Method> = BaselineKind::ALL.iter().map(|&k| Method::Baseline(k)).collect();
        v.extend([Method::Hydra, Method::HydraNoSelfPaced, Method::HydraNoGlc]);
        v
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        Ok(match key.as_str() {
            "clean" => Method::Baseline(BaselineKind::Clean),
            "weak" => Method::Baseline(BaselineKind::Weak),
            "cleanweak" | "cleanplusweak" => Method::Baseline(BaselineKind::CleanPlusWeak),
            "preweak" => Method::Baseline(BaselineKind::PreWeak),
            "iwt" => Method::Baseline(BaselineKind::Iwt),
            "glc" => Method::Baseline(BaselineKind::Glc),
            "hydra" => Method::Hydra,
            "hydraspl" | "hydranoselfpaced" => Method::HydraNoSelfPaced,
            "hydraglc" | "hydranoglc" => Method::HydraNoGlc,
            _ => return Err(Error::Input(format!("unknown method {s:?}"))),
        })
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Per-example weights for clean (`u`) and weak (`v`) examples; the weak
/// head's loss is further scaled by `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IwtConfig {
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
}

impl Default for IwtConfig {
    fn default() -> Self {
        IwtConfig {
            u: 10.0,
            v: 1.0,
            alpha: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    /// Pretraining epochs of Pre-Weak; fine-tuning uses `train`.
    pub pretrain_epochs: usize,
    pub iwt: IwtConfig,
    pub glc: GlcConfig,
    pub hydra: HydraConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            pretrain_epochs: TrainConfig::default().epochs,
            iwt: IwtConfig::default(),
            glc: GlcConfig::default(),
            hydra: HydraConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub method: Method,
    pub model: ModelParams,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
    /// Chosen weak-loss weight for the dual-head methods.
    pub alpha: Option<f64>,
    /// Accuracy of the corrected weak labels against hidden gold, when computed.
    pub corrected_label_accuracy: Option<f64>,
    /// Accuracy of the raw weak labels against hidden gold.
    pub weak_label_accuracy: Option<f64>,
}

fn encode_weak(dataset: &Dataset, vocab: &Vocabulary, enc: &EncoderConfig) -> Vec<EncodedExample> {
    let weak = dataset.weak();
    let mut out = encode_examples(weak, vocab, enc, dataset.num_classes());
    if out.len() == weak.len() {
        for (e, g) in out.iter_mut().zip(dataset.weak_gold()) {
            e.gold = *g;
        }
    }
    out
}

fn encode_split(
    examples: &[crate::corpus::Example],
    dataset: &Dataset,
    vocab: &Vocabulary,
    enc: &EncoderConfig,
) -> Vec<EncodedExample> {
    encode_examples(examples, vocab, enc, dataset.num_classes())
}

/// `u` per clean example through the clean head and `v·alpha` per weak
/// example through the weak head.
pub fn iwt_items<'a>(
    clean: &'a [EncodedExample],
    weak: &'a [EncodedExample],
    cfg: &IwtConfig,
) -> impl Fn(usize) -> BatchItem<'a> + 'a {
    let (n, u, w) = (clean.len(), cfg.u, cfg.v * cfg.alpha);
    move |i| {
        if i < n {
            BatchItem::new(&clean[i], HeadKind::Clean).weighted(u)
        } else {
            BatchItem::new(&weak[i - n], HeadKind::Weak).weighted(w)
        }
    }
}

/// Clean and weak examples in one pool, both through the clean head.
pub fn merged_items<'a>(
    clean: &'a [EncodedExample],
    weak: &'a [EncodedExample],
) -> impl Fn(usize) -> BatchItem<'a> + 'a {
    let n = clean.len();
    move |i| {
        if i < n {
            BatchItem::new(&clean[i], HeadKind::Clean)
        } else {
            BatchItem::new(&weak[i - n], HeadKind::Clean)
        }
    }
}

fn single_source(
    init: ModelParams,
    examples: &[EncodedExample],
    dev: &[EncodedExample],
    train: &TrainConfig,
    seed: u64,
    rng_stream: u64,
) -> Result<FitOutcome> {
    let mut rng = phase_rng(seed, rng_stream);
    fit(
        init,
        examples.len(),
        |i| BatchItem::new(&examples[i], HeadKind::Clean),
        dev,
        train,
        &mut rng,
    )
}

/// Trains `method` on `dataset` and reports dev and test accuracy of the
/// dev-best model. Each method reads only the training splits it uses.
pub fn train_method(
    method: Method,
    dataset: &Dataset,
    vocab: &Vocabulary,
    config: &MethodConfig,
    seed: u64,
) -> Result<RunOutcome> {
    let enc = &config.encoder;
    let init = ModelParams::init(enc, vocab.len(), dataset.num_classes(), seed);
    let dev = encode_split(dataset.dev(), dataset, vocab, enc);
    let needs_clean = !matches!(method, Method::Baseline(BaselineKind::Weak));
    let needs_weak = !matches!(method, Method::Baseline(BaselineKind::Clean));
    let clean = if needs_clean {
        encode_split(dataset.clean(), dataset, vocab, enc)
    } else {
        Vec::new()
    };
    let weak = if needs_weak {
        encode_weak(dataset, vocab, enc)
    } else {
        Vec::new()
    };
    if needs_clean && clean.is_empty() {
        return Err(Error::Input(format!("{method} needs a non-empty clean set")));
    }
    let is_hydra = matches!(method, Method::Hydra | Method::HydraNoSelfPaced | Method::HydraNoGlc);
    if needs_weak && weak.is_empty() && method != Method::Baseline(BaselineKind::CleanPlusWeak) && !is_hydra {
        return Err(Error::Input(format!("{method} needs a non-empty weak set")));
    }
    let weak_label_accuracy = crate::glc::label_accuracy(&weak);

    let mut alpha = None;
    let mut corrected_label_accuracy = None;
    let model = match method {
        Method::Baseline(BaselineKind::Clean) => {
            single_source(init, &clean, &dev, &config.train, seed, stream::CLEAN)?.model
        }
        Method::Baseline(BaselineKind::Weak) => {
            single_source(init, &weak, &dev, &config.train, seed, stream::WEAK)?.model
        }
        Method::Baseline(BaselineKind::CleanPlusWeak) => {
            let mut rng = phase_rng(seed, stream::MERGED);
            fit(
                init,
                clean.len() + weak.len(),
                merged_items(&clean, &weak),
                &dev,
                &config.train,
                &mut rng,
            )?
            .model
        }
        Method::Baseline(BaselineKind::PreWeak) => {
            let pre = TrainConfig {
                epochs: config.pretrain_epochs,
                ..config.train.clone()
            };
            let pretrained = single_source(init, &weak, &dev, &pre, seed, stream::WEAK)?.model;
            single_source(pretrained, &clean, &dev, &config.train, seed, stream::CLEAN)?.model
        }
        Method::Baseline(BaselineKind::Iwt) => {
            alpha = Some(config.iwt.alpha);
            let mut rng = phase_rng(seed, stream::MERGED);
            fit(
                init,
                clean.len() + weak.len(),
                iwt_items(&clean, &weak, &config.iwt),
                &dev,
                &config.train,
                &mut rng,
            )?
            .model
        }
        Method::Baseline(BaselineKind::Glc) => {
            let f = train_weak_model(init.clone(), &weak, &dev, &config.glc.train, seed)?;
            let c = estimate_from_model(&f.model, &clean)?;
            let f_prime = train_corrected_model(init, &clean, &weak, &c, &dev, &config.glc.train, seed)?;
            let corrected = crate::glc::correct_labels(&f_prime.model, &weak, false)?;
            corrected_label_accuracy = crate::glc::label_accuracy(&corrected);
            f_prime.model
        }
        Method::Hydra | Method::HydraNoSelfPaced | Method::HydraNoGlc if weak.is_empty() => {
            log::warn!("{method}: empty weak set, training on clean data only");
            single_source(init, &clean, &dev, &config.train, seed, stream::CLEAN)?.model
        }
        Method::Hydra | Method::HydraNoSelfPaced | Method::HydraNoGlc => {
            let hydra = HydraConfig {
                self_paced: method != Method::HydraNoSelfPaced,
                glc: method != Method::HydraNoGlc,
                glc_config: config.glc.clone(),
                ..config.hydra.clone()
            };
            let (out, glc) = train_hydra_grid(&init, &clean, &weak, &dev, &hydra, seed)?;
            alpha = Some(out.alpha);
            corrected_label_accuracy = glc.and_then(|g| crate::glc::label_accuracy(&g.corrected));
            out.model
        }
    };
    let dev_accuracy = accuracy(&model, &dev)?;
    let test = encode_split(dataset.test(), dataset, vocab, enc);
    let test_accuracy = accuracy(&model, &test)?;
    Ok(RunOutcome {
        method,
        model,
        dev_accuracy,
        test_accuracy,
        alpha,
        corrected_label_accuracy,
        weak_label_accuracy,
    })
}

/// Convenience wrapper for the six baselines.
pub fn train_baseline(
    kind: BaselineKind,
    dataset: &Dataset,
    vocab: &Vocabulary,
    config: &MethodConfig,
    seed: u64,
) -> Result<RunOutcome> {
    train_method(Method::Baseline(kind), dataset, vocab, config, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatedMetrics {
    pub per_seed: Vec<SeedMetrics>,
    pub mean_dev: f64,
    pub mean_test: f64,
}

pub fn summarize(per_seed: Vec<SeedMetrics>) -> Result<RepeatedMetrics> {
    if per_seed.is_empty() {
        return Err(Error::Input("at least one seed is required".into()));
    }
    let n = per_seed.len() as f64;
    let mean_dev = per_seed.iter().map(|s| s.dev_accuracy).sum::<f64>() / n;
    let mean_test = per_seed.iter().map(|s| s.test_accuracy).sum::<f64>() / n;
    Ok(RepeatedMetrics {
        per_seed,
        mean_dev,
        mean_test,
    })
}

/// Trains once per seed and averages.
pub fn run_repeated(
    method: Method,
    dataset: &Dataset,
    vocab: &Vocabulary,
    config: &MethodConfig,
    seeds: &[u64],
) -> Result<RepeatedMetrics> {
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let out = train_method(method, dataset, vocab, config, seed)?;
        per_seed.push(SeedMetrics {
            seed,
            dev_accuracy: out.dev_accuracy,
            test_accuracy: out.test_accuracy,
        });
    }
    summarize(per_seed)
}
