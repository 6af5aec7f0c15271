use rand::Rng;

use super::vocab::{TokenSequence, PAD};
use crate::diffkit::{ParamTensor, Parameterized};

/// Mean of the word embeddings of the non-padding prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct AvgEncoder {
    pub embedding: ParamTensor,
}

pub(crate) fn init_embedding<R: Rng>(vocab_size: usize, dim: usize, rng: &mut R) -> ParamTensor {
    let mut table = ParamTensor::uniform("embedding", &[vocab_size, dim], 0.1, rng).with_sparse_rows();
    table.row_mut(PAD).iter_mut().for_each(|v| *v = 0.0);
    table
}

impl AvgEncoder {
    pub fn new(embedding: ParamTensor) -> Self {
        AvgEncoder { embedding }
    }

    pub fn init<R: Rng>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        AvgEncoder {
            embedding: init_embedding(vocab_size, dim, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.embedding.shape()[1]
    }

    pub fn forward(&self, seq: &TokenSequence) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let tokens = seq.tokens();
        if tokens.is_empty() {
            return out;
        }
        for &id in tokens {
            for (o, e) in out.iter_mut().zip(self.embedding.row(id)) {
                *o += e;
            }
        }
        let n = tokens.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    /// Each contributing row receives `dout / true_length`.
    pub fn backward(&mut self, seq: &TokenSequence, dout: &[f64]) {
        let tokens = seq.tokens();
        if tokens.is_empty() {
            return;
        }
        let scale = 1.0 / tokens.len() as f64;
        for &id in tokens {
            if id == PAD {
                continue;
            }
            for (g, d) in self.embedding.grad_row_mut(id).iter_mut().zip(dout) {
                *g += d * scale;
            }
        }
    }
}

impl Parameterized for AvgEncoder {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.embedding]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.embedding]
    }
}
