//! Randomized gradient checks; each returns the worst relative error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mailintent::diffkit::{grad_check, softmax_cross_entropy, GradCheckConfig, Linear, ParamTensor, Parameterized};
use mailintent::encoder::{AvgEncoder, BiLstm, EncoderConfig, EncoderKind, LstmCell, TokenSequence};
use mailintent::glc::CorruptionMatrix;
use mailintent::model::{HeadKind, ModelParams};
use mailintent::train::{accumulate, BatchItem, EncodedExample, LossKind};

fn random_target(rng: &mut ChaCha8Rng, l: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..l).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|r| r / s).collect()
}

fn random_sequence(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize, min_len: usize) -> TokenSequence {
    let n = rng.gen_range(min_len..=max_len);
    let ids: Vec<usize> = (0..n).map(|_| rng.gen_range(1..vocab)).collect();
    TokenSequence::from_ids(&ids, max_len)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Softmax cross-entropy with the logits as parameters.
pub fn cross_entropy(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let l = rng.gen_range(2..6);
        let mut logits = ParamTensor::zeros("logits", &[l]);
        logits.values = (0..l).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let target = random_target(&mut rng, l);
        let r = grad_check(
            &mut logits,
            |p| {
                let (loss, _, dz) = softmax_cross_entropy(&p.values, &target);
                p.grad.iter_mut().zip(&dz).for_each(|(g, d)| *g += d);
                loss
            },
            &GradCheckConfig::default(),
        );
        worst = worst.max(r.max_rel_error);
    }
    worst
}

/// Linear head under cross-entropy with a fixed input.
pub fn linear_head(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (d, l) = (rng.gen_range(1..6), rng.gen_range(2..5));
        let mut head = Linear::init("head", d, l, &mut rng);
        let x = uniform(&mut rng, d);
        let target = random_target(&mut rng, l);
        let r = grad_check(
            &mut head,
            |h| {
                let (loss, _, dz) = softmax_cross_entropy(&h.forward(&x), &target);
                h.backward(&x, &dz);
                loss
            },
            &GradCheckConfig::default(),
        );
        worst = worst.max(r.max_rel_error);
    }
    worst
}

struct AvgWithHead(AvgEncoder, Linear);

impl Parameterized for AvgWithHead {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p = self.0.params();
        p.extend(self.1.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.0.params_mut();
        p.extend(self.1.params_mut());
        p
    }
}

/// Averaged embeddings followed by a linear head and cross-entropy.
pub fn avg_encoder(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (v, d, l) = (rng.gen_range(3..9), rng.gen_range(1..5), rng.gen_range(2..4));
        let mut m = AvgWithHead(AvgEncoder::init(v, d, &mut rng), Linear::init("head", d, l, &mut rng));
        let seq = random_sequence(&mut rng, v, 10, 1);
        let target = random_target(&mut rng, l);
        let r = grad_check(
            &mut m,
            |m| {
                let f = m.0.forward(&seq);
                let (loss, _, dz) = softmax_cross_entropy(&m.1.forward(&f), &target);
                let df = m.1.backward(&f, &dz);
                m.0.backward(&seq, &df);
                loss
            },
            &GradCheckConfig::default(),
        );
        worst = worst.max(r.max_rel_error);
    }
    worst
}

/// One LSTM step under a random linear functional of `(h, c)`.
pub fn lstm_cell(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (d, h) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let mut cell = LstmCell::init("cell", d, h, &mut rng);
        let x = uniform(&mut rng, d);
        let hp = uniform(&mut rng, h);
        let cp = uniform(&mut rng, h);
        let wh = uniform(&mut rng, h);
        let wc = uniform(&mut rng, h);
        let r = grad_check(
            &mut cell,
            |c| {
                let (hn, cn, cache) = c.step(&x, &hp, &cp);
                let loss: f64 = hn.iter().zip(&wh).map(|(a, b)| a * b).sum::<f64>()
                    + cn.iter().zip(&wc).map(|(a, b)| a * b).sum::<f64>();
                c.step_backward(&x, &cache, &wh, &wc);
                loss
            },
            &GradCheckConfig::default(),
        );
        worst = worst.max(r.max_rel_error);
    }
    worst
}

/// Bidirectional LSTM unrolled over sequences of up to 16 tokens.
pub fn bilstm_sequence(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (v, d, h) = (rng.gen_range(3..8), rng.gen_range(1..4), rng.gen_range(1..4));
        let mut m = BiLstm::init(v, d, h, &mut rng);
        let seq = random_sequence(&mut rng, v, 16, 1);
        let w = uniform(&mut rng, h);
        let r = grad_check(
            &mut m,
            |m| {
                let (out, cache) = m.forward(&seq).unwrap();
                let loss = out.iter().zip(&w).map(|(a, b)| a * b).sum();
                m.backward(&seq, &cache, &w);
                loss
            },
            &GradCheckConfig::default(),
        );
        worst = worst.max(r.max_rel_error);
    }
    worst
}

/// The full dual-headed model: clean cross-entropy, weak cross-entropy and
/// the corrected loss, for both encoders.
pub fn dual_head_model(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..cases {
        let kind = if k % 2 == 0 {
            EncoderKind::Avg
        } else {
            EncoderKind::BiLstm
        };
        let cfg = EncoderConfig {
            kind,
            embed_dim: rng.gen_range(1..4),
            hidden_dim: 2 * rng.gen_range(1..3),
            max_len: 8,
            ..EncoderConfig::default()
        };
        let (v, l) = (rng.gen_range(3..7), rng.gen_range(2..4));
        let mut model = ModelParams::init(&cfg, v, l, rng.gen());
        let examples: Vec<EncodedExample> = (0..3)
            .map(|_| EncodedExample {
                seq: random_sequence(&mut rng, v, 8, 1),
                target: random_target(&mut rng, l),
                gold: None,
            })
            .collect();
        let rows: Vec<Vec<f64>> = (0..l).map(|_| random_target(&mut rng, l)).collect();
        let c = CorruptionMatrix::new(rows).unwrap();
        let r = grad_check(
            &mut model,
            |m| {
                let items = [
                    BatchItem::new(&examples[0], HeadKind::Clean).weighted(0.7),
                    BatchItem::new(&examples[1], HeadKind::Weak).weighted(1.3),
                    BatchItem::new(&examples[2], HeadKind::Clean).with_loss(LossKind::Corrected(&c)),
                ];
                accumulate(m, &items).unwrap()
            },
            &GradCheckConfig::default(),
        );
        worst = worst.max(r.max_rel_error);
    }
    worst
}
