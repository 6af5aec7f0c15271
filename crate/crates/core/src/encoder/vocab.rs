use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const OOV: usize = 1;
const RESERVED: usize = 2;

/// Token inventory. Ids 0 and 1 are reserved for padding and unknown tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl Vocabulary {
    /// Every distinct word of `texts`, in sorted order after the reserved ids.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<String> = texts.into_iter().flat_map(words).collect();
        Self::from_tokens(set.into_iter().collect())
    }

    /// `tokens[k]` gets id `k + 2`. Later duplicates are ignored.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let mut vocab = Vocabulary {
            tokens: vec!["<pad>".to_string(), "<oov>".to_string()],
            index: HashMap::new(),
        };
        for t in tokens {
            if !vocab.index.contains_key(&t) {
                vocab.index.insert(t.clone(), vocab.tokens.len());
                vocab.tokens.push(t);
            }
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == RESERVED
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Non-reserved tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens[RESERVED..]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for t in self.tokens() {
            text.push_str(t);
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.chars().any(char::is_whitespace) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("invalid vocabulary token {line:?}"),
                });
            }
            tokens.push(line.to_string());
        }
        let vocab = Self::from_tokens(tokens);
        if vocab.len() != text.lines().count() + RESERVED {
            return Err(Error::Validation("duplicate tokens in vocabulary file".into()));
        }
        Ok(vocab)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    /// Keep the first `max_len` tokens.
    #[default]
    Head,
    /// Keep the last `max_len` tokens.
    Tail,
}

/// Fixed-length id sequence; positions from `true_length` on are `PAD`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    pub true_length: usize,
}

impl TokenSequence {
    pub fn tokens(&self) -> &[usize] {
        &self.ids[..self.true_length]
    }

    pub fn from_ids(ids: &[usize], max_len: usize) -> Self {
        let n = ids.len().min(max_len);
        let mut padded = ids[..n].to_vec();
        padded.resize(max_len, PAD);
        TokenSequence {
            ids: padded,
            true_length: n,
        }
    }
}

pub fn tokenize(text: &str, vocab: &Vocabulary, max_len: usize) -> TokenSequence {
    tokenize_with(text, vocab, max_len, Truncation::Head)
}

pub fn tokenize_with(text: &str, vocab: &Vocabulary, max_len: usize, truncation: Truncation) -> TokenSequence {
    let ids: Vec<usize> = words(text).iter().map(|w| vocab.id(w)).collect();
    let kept = match truncation {
        Truncation::Head => &ids[..ids.len().min(max_len)],
        Truncation::Tail => &ids[ids.len().saturating_sub(max_len)..],
    };
    TokenSequence::from_ids(kept, max_len)
}
