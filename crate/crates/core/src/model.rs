//! Shared encoder with separate clean and weak classification heads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffkit::{argmax, Linear, ParamTensor, Parameterized};
use crate::encoder::{classify, Encoder, EncoderConfig, TokenSequence};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeadKind {
    Clean,
    Weak,
}

/// `enc(·; θ)` shared by the clean head `γ_c` and the weak head `γ_w`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub encoder: Encoder,
    pub clean_head: Linear,
    pub weak_head: Linear,
}

impl ModelParams {
    /// Encoder and heads come from separate RNG streams of `seed`, so every
    /// trainer starts from identical parameters for the same seed.
    pub fn init(config: &EncoderConfig, vocab_size: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let encoder = Encoder::init(config, vocab_size, &mut rng);
        rng.set_stream(2);
        let clean_head = Linear::init("clean_head", config.output_dim(), num_classes, &mut rng);
        rng.set_stream(3);
        let weak_head = Linear::init("weak_head", config.output_dim(), num_classes, &mut rng);
        ModelParams {
            encoder,
            clean_head,
            weak_head,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.clean_head.output_dim()
    }

    pub fn head(&self, head: HeadKind) -> &Linear {
        match head {
            HeadKind::Clean => &self.clean_head,
            HeadKind::Weak => &self.weak_head,
        }
    }

    pub fn head_mut(&mut self, head: HeadKind) -> &mut Linear {
        match head {
            HeadKind::Clean => &mut self.clean_head,
            HeadKind::Weak => &mut self.weak_head,
        }
    }

    pub fn distribution(&self, seq: &TokenSequence, head: HeadKind) -> Result<Vec<f64>> {
        classify(&self.encoder.encode(seq)?, self.head(head))
    }

    /// Clean-head argmax; ties go to the lowest class index.
    pub fn predict(&self, seq: &TokenSequence) -> Result<(usize, Vec<f64>)> {
        let p = self.distribution(seq, HeadKind::Clean)?;
        Ok((argmax(&p), p))
    }
}

impl Parameterized for ModelParams {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p = self.encoder.params();
        p.extend(self.clean_head.params());
        p.extend(self.weak_head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.encoder.params_mut();
        p.extend(self.clean_head.params_mut());
        p.extend(self.weak_head.params_mut());
        p
    }
}
