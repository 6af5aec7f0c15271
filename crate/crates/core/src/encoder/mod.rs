//! Tokenization, vocabulary, the averaged-embedding and BiLSTM encoders, and
//! classification heads.

mod avg;
mod embeddings;
mod lstm;
mod vocab;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use avg::AvgEncoder;
pub use embeddings::load_pretrained_embeddings;
pub use lstm::{BiLstm, BiLstmCache, LstmCell, StepCache};
pub use vocab::{tokenize, tokenize_with, words, TokenSequence, Truncation, Vocabulary, OOV, PAD};

use crate::diffkit::{softmax, Linear, ParamTensor, Parameterized};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    #[default]
    Avg,
    BiLstm,
}

impl std::fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EncoderKind::Avg => "avg",
            EncoderKind::BiLstm => "bilstm",
        })
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "avg" | "avgemb" => Ok(EncoderKind::Avg),
            "bilstm" | "lstm" => Ok(EncoderKind::BiLstm),
            other => Err(Error::Input(format!("unknown encoder {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub max_len: usize,
    pub truncation: Truncation,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            kind: EncoderKind::Avg,
            embed_dim: 50,
            hidden_dim: 64,
            max_len: 128,
            truncation: Truncation::Head,
        }
    }
}

impl EncoderConfig {
    pub fn output_dim(&self) -> usize {
        match self.kind {
            EncoderKind::Avg => self.embed_dim,
            EncoderKind::BiLstm => self.hidden_dim,
        }
    }

    pub fn tokenize(&self, text: &str, vocab: &Vocabulary) -> TokenSequence {
        tokenize_with(text, vocab, self.max_len, self.truncation)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Encoder {
    Avg(AvgEncoder),
    BiLstm(BiLstm),
}

#[derive(Clone, Debug)]
pub enum EncoderCache {
    Avg,
    BiLstm(BiLstmCache),
}

impl Encoder {
    pub fn init<R: Rng>(config: &EncoderConfig, vocab_size: usize, rng: &mut R) -> Self {
        match config.kind {
            EncoderKind::Avg => Encoder::Avg(AvgEncoder::init(vocab_size, config.embed_dim, rng)),
            EncoderKind::BiLstm => Encoder::BiLstm(BiLstm::init(vocab_size, config.embed_dim, config.hidden_dim, rng)),
        }
    }

    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::Avg(_) => EncoderKind::Avg,
            Encoder::BiLstm(_) => EncoderKind::BiLstm,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::Avg(e) => e.dim(),
            Encoder::BiLstm(e) => e.hidden(),
        }
    }

    pub fn embedding(&self) -> &ParamTensor {
        match self {
            Encoder::Avg(e) => &e.embedding,
            Encoder::BiLstm(e) => &e.embedding,
        }
    }

    pub fn embedding_mut(&mut self) -> &mut ParamTensor {
        match self {
            Encoder::Avg(e) => &mut e.embedding,
            Encoder::BiLstm(e) => &mut e.embedding,
        }
    }

    pub fn forward(&self, seq: &TokenSequence) -> Result<(Vec<f64>, EncoderCache)> {
        match self {
            Encoder::Avg(e) => Ok((e.forward(seq), EncoderCache::Avg)),
            Encoder::BiLstm(e) => e.forward(seq).map(|(out, c)| (out, EncoderCache::BiLstm(c))),
        }
    }

    pub fn encode(&self, seq: &TokenSequence) -> Result<Vec<f64>> {
        match self {
            Encoder::Avg(e) => Ok(e.forward(seq)),
            Encoder::BiLstm(e) => e.forward(seq).map(|(out, _)| out),
        }
    }

    pub fn backward(&mut self, seq: &TokenSequence, cache: &EncoderCache, dout: &[f64]) {
        match (self, cache) {
            (Encoder::Avg(e), _) => e.backward(seq, dout),
            (Encoder::BiLstm(e), EncoderCache::BiLstm(c)) => e.backward(seq, c, dout),
            (Encoder::BiLstm(_), EncoderCache::Avg) => {
                panic!("recurrent encoder backward called with an averaging cache")
            }
        }
    }
}

impl Parameterized for Encoder {
    fn params(&self) -> Vec<&ParamTensor> {
        match self {
            Encoder::Avg(e) => e.params(),
            Encoder::BiLstm(e) => e.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        match self {
            Encoder::Avg(e) => e.params_mut(),
            Encoder::BiLstm(e) => e.params_mut(),
        }
    }
}

/// Softmax of the head's affine map.
pub fn classify(feature: &[f64], head: &Linear) -> Result<Vec<f64>> {
    if feature.len() != head.input_dim() {
        return Err(Error::shape(head.input_dim(), feature.len()));
    }
    Ok(softmax(&head.forward(feature)))
}
