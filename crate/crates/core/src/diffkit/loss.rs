use crate::error::{Error, Result};

/// Maximum deviation from 1 tolerated for probability vectors.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Pulls a gradient w.r.t. probabilities back through softmax.
pub fn softmax_backward(probs: &[f64], dprobs: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(dprobs).map(|(p, d)| p * d).sum();
    probs.iter().zip(dprobs).map(|(p, d)| p * (d - dot)).collect()
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE || p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::Validation(format!(
            "{name} is not a probability distribution (sum {sum})"
        )));
    }
    Ok(())
}

/// `-Σ target·log(predicted)` for a softmax output, with the gradient
/// w.r.t. the logits that produced it (`predicted - target`).
pub fn cross_entropy(predicted: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if predicted.len() != target.len() {
        return Err(Error::shape(predicted.len(), target.len()));
    }
    check_distribution("predicted", predicted)?;
    check_distribution("target", target)?;
    let loss = -predicted
        .iter()
        .zip(target)
        .filter(|(_, &t)| t > 0.0)
        .map(|(&p, &t)| t * p.ln())
        .sum::<f64>();
    let grad = predicted.iter().zip(target).map(|(p, t)| p - t).collect();
    Ok((loss, grad))
}

/// Stable cross-entropy from raw logits. Returns (loss, probabilities, dloss/dlogits).
pub fn softmax_cross_entropy(logits: &[f64], target: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    debug_assert_eq!(logits.len(), target.len());
    let logp = log_softmax(logits);
    let loss = -logp
        .iter()
        .zip(target)
        .filter(|(_, &t)| t > 0.0)
        .map(|(lp, t)| t * lp)
        .sum::<f64>();
    let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
    let tsum: f64 = target.iter().sum();
    let grad = probs.iter().zip(target).map(|(p, t)| p * tsum - t).collect();
    (loss, probs, grad)
}
