mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mailintent::baselines::{iwt_items, merged_items, run_repeated, train_method, BaselineKind, IwtConfig, Method};
use mailintent::corpus::Split;
use mailintent::diffkit::{ParamTensor, Parameterized};
use mailintent::encoder::{EncoderConfig, TokenSequence};
use mailintent::glc::{correct_labels, estimate_corruption_matrix, CorruptionMatrix};
use mailintent::hydra::{dual_loss, dual_loss_value, full_batch_step, select_weak, self_paced_objective, weak_losses};
use mailintent::model::{HeadKind, ModelParams};
use mailintent::train::{accumulate, batch_loss, BatchItem, EncodedExample};

const VOCAB: usize = 30;

fn enc_config() -> EncoderConfig {
    EncoderConfig {
        embed_dim: 6,
        max_len: 12,
        ..EncoderConfig::default()
    }
}

/// Class 1 examples favour the upper half of the vocabulary.
fn examples(n: usize, seed: u64) -> Vec<EncodedExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y = rng.gen_range(0..2usize);
            let len = rng.gen_range(2..10);
            let ids: Vec<usize> = (0..len)
                .map(|_| {
                    if rng.gen_bool(0.7) {
                        1 + y * (VOCAB / 2) + rng.gen_range(0..VOCAB / 2 - 1)
                    } else {
                        rng.gen_range(1..VOCAB)
                    }
                })
                .collect();
            let mut target = vec![0.0; 2];
            target[y] = 1.0;
            EncodedExample {
                seq: TokenSequence::from_ids(&ids, 12),
                target,
                gold: Some(y),
            }
        })
        .collect()
}

fn zero_grads(m: &mut ModelParams) {
    for p in m.params_mut() {
        p.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

fn grads(ps: Vec<&ParamTensor>) -> Vec<f64> {
    ps.iter().flat_map(|p| p.grad.iter().copied()).collect()
}

fn exhaustive_v(losses: &[f64], lambda: f64, alpha: f64) -> Vec<bool> {
    let n = losses.len();
    let mut best: Option<(f64, usize, u32)> = None;
    for mask in 0u32..(1 << n) {
        let obj: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| alpha * losses[i] - lambda)
            .sum();
        let size = mask.count_ones() as usize;
        // Among minimizers, prefer the smallest set (ties excluded).
        if best.is_none_or(|(b, s, _)| obj < b || (obj == b && size < s)) {
            best = Some((obj, size, mask));
        }
    }
    let mask = best.unwrap().2;
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn select_weak_minimizes_the_v_subproblem(
        losses in prop::collection::vec(0.0f64..4.0, 0..10),
        lambda in 0.01f64..3.0,
        alpha in prop::sample::select(vec![0.1, 1.0, 10.0]),
    ) {
        prop_assert_eq!(select_weak(&losses, lambda, alpha), exhaustive_v(&losses, lambda, alpha));
    }

    #[test]
    fn selected_set_grows_with_lambda(
        losses in prop::collection::vec(0.0f64..4.0, 0..50),
        a in 0.0f64..3.0,
        b in 0.0f64..3.0,
        alpha in 0.1f64..10.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = select_weak(&losses, lo, alpha);
        let large = select_weak(&losses, hi, alpha);
        for (s, l) in small.iter().zip(&large) {
            prop_assert!(!s || *l);
        }
    }

    #[test]
    fn corruption_estimate_ignores_order(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs: Vec<(usize, Vec<f64>)> = (0..n)
            .map(|_| {
                let p: f64 = rng.gen();
                (rng.gen_range(0..2), vec![p, 1.0 - p])
            })
            .collect();
        let a = estimate_corruption_matrix(&pairs, 2).unwrap();
        use rand::seq::SliceRandom;
        pairs.shuffle(&mut rng);
        let b = estimate_corruption_matrix(&pairs, 2).unwrap();
        prop_assert_eq!(a.entries(), b.entries());
    }
}

#[test]
fn constant_predictions_give_a_constant_column() {
    let pairs: Vec<(usize, Vec<f64>)> = (0..40).map(|i| (i % 2, vec![1.0, 0.0])).collect();
    let c = estimate_corruption_matrix(&pairs, 2).unwrap();
    assert_eq!(c.entries(), &[vec![1.0, 0.0], vec![1.0, 0.0]]);
}

#[test]
fn corrected_labels_are_distributions() {
    let model = ModelParams::init(&enc_config(), VOCAB, 2, 4);
    let weak = examples(1_000, 1);
    let soft = correct_labels(&model, &weak, false).unwrap();
    assert_eq!(soft.len(), weak.len());
    for (c, w) in soft.iter().zip(&weak) {
        assert!((c.target.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(c.target.iter().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(c.seq, w.seq);
        assert_eq!(c.gold, w.gold);
    }
    let hard = correct_labels(&model, &weak, true).unwrap();
    for (h, s) in hard.iter().zip(&soft) {
        assert_eq!(h.label(), s.label());
        assert_eq!(h.target.iter().filter(|&&p| p == 1.0).count(), 1);
    }
}

#[test]
fn uniform_model_gives_uniform_labels() {
    let mut model = ModelParams::init(&enc_config(), VOCAB, 2, 4);
    for p in model.clean_head.params_mut() {
        p.values.iter_mut().for_each(|v| *v = 0.0);
    }
    for c in correct_labels(&model, &examples(50, 2), false).unwrap() {
        assert_eq!(c.target, vec![0.5, 0.5]);
    }
}

#[test]
fn dual_loss_identities() {
    let data = examples(6, 3);
    let (clean, weak): (Vec<&EncodedExample>, Vec<&EncodedExample>) =
        (data[..3].iter().collect(), data[3..].iter().collect());
    let model = ModelParams::init(&enc_config(), VOCAB, 2, 5);
    let clean_only: Vec<BatchItem> = clean
        .iter()
        .map(|e| BatchItem::new(e, HeadKind::Clean).weighted(1.0 / 3.0))
        .collect();
    let expected = batch_loss(&model, &clean_only).unwrap();
    assert_eq!(dual_loss_value(&model, &clean, &weak, 0.0).unwrap(), expected);

    let mut zeroed = model.clone();
    for head in [HeadKind::Clean, HeadKind::Weak] {
        for p in zeroed.head_mut(head).params_mut() {
            p.values.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let one_each = dual_loss_value(&zeroed, &clean[..1], &weak[..1], 1.0).unwrap();
    assert!((one_each - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    let weighted = dual_loss_value(&zeroed, &clean[..1], &weak[..1], 2.5).unwrap();
    assert!((weighted - 3.5 * std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn perfect_fit_has_near_zero_loss() {
    let data = examples(4, 9);
    let refs: Vec<&EncodedExample> = data.iter().collect();
    let mut model = ModelParams::init(&enc_config(), VOCAB, 2, 5);
    // A single-label batch, separated by the bias alone.
    let label = data[0].label();
    let same: Vec<&EncodedExample> = refs.iter().copied().filter(|e| e.label() == label).collect();
    for head in [HeadKind::Clean, HeadKind::Weak] {
        let h = model.head_mut(head);
        h.weight.values.iter_mut().for_each(|v| *v = 0.0);
        h.bias.values = vec![0.0; 2];
        h.bias.values[label] = 60.0;
    }
    assert!(dual_loss_value(&model, &same, &same, 1.0).unwrap() < 1e-20);
}

#[test]
fn clean_loss_leaves_the_weak_head_untouched() {
    let data = examples(8, 4);
    let refs: Vec<&EncodedExample> = data.iter().collect();
    let mut model = ModelParams::init(&enc_config(), VOCAB, 2, 6);
    zero_grads(&mut model);
    dual_loss(&mut model, &refs, &refs, 0.0).unwrap();
    assert!(grads(model.weak_head.params()).iter().all(|&g| g == 0.0));
    assert!(grads(model.clean_head.params()).iter().any(|&g| g != 0.0));

    zero_grads(&mut model);
    let weak_only: Vec<BatchItem> = data.iter().map(|e| BatchItem::new(e, HeadKind::Weak)).collect();
    accumulate(&mut model, &weak_only).unwrap();
    assert!(grads(model.clean_head.params()).iter().all(|&g| g == 0.0));
    assert!(grads(model.weak_head.params()).iter().any(|&g| g != 0.0));
}

#[test]
fn iwt_with_unit_weights_and_tied_heads_is_clean_plus_weak() {
    let clean = examples(10, 5);
    let weak = examples(15, 6);
    let mut model = ModelParams::init(&enc_config(), VOCAB, 2, 7);
    model.weak_head = model.clean_head.clone();
    let cfg = IwtConfig {
        u: 1.0,
        v: 1.0,
        alpha: 1.0,
    };
    let n = clean.len() + weak.len();
    let iwt = iwt_items(&clean, &weak, &cfg);
    let merged = merged_items(&clean, &weak);
    let a: Vec<BatchItem> = (0..n).map(&iwt).collect();
    let b: Vec<BatchItem> = (0..n).map(&merged).collect();
    assert!((batch_loss(&model, &a).unwrap() - batch_loss(&model, &b).unwrap()).abs() < 1e-12);
}

#[test]
fn self_paced_alternation_does_not_increase_the_objective() {
    let clean = examples(20, 7);
    let mut weak = examples(60, 8);
    for e in weak.iter_mut().step_by(3) {
        e.target.reverse();
    }
    let (lambda, alpha) = (0.7, 1.0);
    let mut model = ModelParams::init(&enc_config(), VOCAB, 2, 8);
    let mut v = vec![false; weak.len()];
    let mut prev = self_paced_objective(&model, &clean, &weak, &v, lambda, alpha).unwrap();
    for _ in 0..15 {
        v = select_weak(&weak_losses(&model, &weak).unwrap(), lambda, alpha);
        let after_v = self_paced_objective(&model, &clean, &weak, &v, lambda, alpha).unwrap();
        assert!(after_v <= prev + 1e-12, "v-step {prev} -> {after_v}");
        zero_grads(&mut model);
        full_batch_step(&mut model, &clean, &weak, &v, alpha, 0.05).unwrap();
        let after_theta = self_paced_objective(&model, &clean, &weak, &v, lambda, alpha).unwrap();
        assert!(after_theta <= after_v + 1e-12, "theta-step {after_v} -> {after_theta}");
        prev = after_theta;
    }
}

#[test]
fn identity_matrix_corrected_loss_is_plain_cross_entropy() {
    let c = CorruptionMatrix::identity(2);
    let (loss, _) = c.corrected_loss(&[0.3, 0.7], &[0.0, 1.0]).unwrap();
    assert!((loss + 0.7f64.ln()).abs() < 1e-12);
}

#[test]
fn trainers_read_only_their_splits() {
    let (ds, vocab) = common::small_dataset(3);
    let cfg = common::small_config();
    for (kind, clean, weak) in [
        (BaselineKind::Clean, true, false),
        (BaselineKind::Weak, false, true),
        (BaselineKind::CleanPlusWeak, true, true),
    ] {
        ds.audit().reset();
        train_method(Method::Baseline(kind), &ds, &vocab, &cfg, 1).unwrap();
        assert_eq!(ds.audit().touched(Split::Clean), clean, "{kind:?}");
        assert_eq!(ds.audit().touched(Split::Weak), weak, "{kind:?}");
        assert!(ds.audit().touched(Split::Dev) && ds.audit().touched(Split::Test));
    }
}

#[test]
fn clean_baseline_ignores_weak_contents() {
    let (ds, vocab) = common::small_dataset(4);
    let cfg = common::small_config();
    let clean = Method::Baseline(BaselineKind::Clean);
    let a = train_method(clean, &ds, &vocab, &cfg, 2).unwrap();
    let flipped = ds
        .weak()
        .iter()
        .map(|e| mailintent::corpus::Example {
            label: mailintent::corpus::Label::Hard(1 - e.label.argmax()),
            text: "unrelated words".into(),
            ..e.clone()
        })
        .collect();
    let b = train_method(clean, &ds.with_weak(flipped).unwrap(), &vocab, &cfg, 2).unwrap();
    assert_eq!(a.model, b.model);
}

#[test]
fn pre_weak_without_pretraining_is_clean() {
    let (ds, vocab) = common::small_dataset(5);
    let mut cfg = common::small_config();
    cfg.pretrain_epochs = 0;
    let a = train_method(Method::Baseline(BaselineKind::PreWeak), &ds, &vocab, &cfg, 3).unwrap();
    let b = train_method(Method::Baseline(BaselineKind::Clean), &ds, &vocab, &cfg, 3).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.test_accuracy, b.test_accuracy);
}

#[test]
fn repeated_runs_are_deterministic() {
    let (ds, vocab) = common::small_dataset(6);
    let cfg = common::small_config();
    for m in [
        Method::Hydra,
        Method::Baseline(BaselineKind::Glc),
        Method::Baseline(BaselineKind::Iwt),
    ] {
        let a = run_repeated(m, &ds, &vocab, &cfg, &[1, 2]).unwrap();
        let b = run_repeated(m, &ds, &vocab, &cfg, &[1, 2]).unwrap();
        assert_eq!(a, b, "{m}");
    }
}

#[test]
fn every_method_starts_from_the_same_parameters() {
    let cfg = common::small_config();
    let a = ModelParams::init(&cfg.encoder, 100, 2, 9);
    let b = ModelParams::init(&cfg.encoder, 100, 2, 9);
    assert_eq!(a, b);
    assert_ne!(a, ModelParams::init(&cfg.encoder, 100, 2, 10));
}

#[test]
fn hydra_reports_alpha_and_label_accuracies() {
    let (ds, vocab) = common::small_dataset(7);
    let cfg = common::small_config();
    let out = train_method(Method::Hydra, &ds, &vocab, &cfg, 1).unwrap();
    assert_eq!(out.alpha, Some(1.0));
    assert!(out.weak_label_accuracy.is_some());
    assert!(out.corrected_label_accuracy.is_some());
    let no_glc = train_method(Method::HydraNoGlc, &ds, &vocab, &cfg, 1).unwrap();
    assert!(no_glc.corrected_label_accuracy.is_none());
}
