use std::collections::BTreeMap;

use super::AlError;

/// Numerically stable softmax (shifted by the max logit).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, AlError> {
    if logits.is_empty() || logits.iter().any(|h| !h.is_finite()) {
        return Err(AlError::NonFiniteInput);
    }
    Ok(softmax_unchecked(logits))
}

pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|h| (h - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `Σ α_i L_i` over the tasks present in `losses`.
pub fn joint_loss(losses: &BTreeMap<String, f64>, alphas: &BTreeMap<String, f64>) -> Result<f64, AlError> {
    losses.iter().try_fold(0.0, |acc, (task, loss)| {
        let alpha = alphas.get(task).ok_or_else(|| AlError::MissingAlpha(task.clone()))?;
        Ok(acc + alpha * loss)
    })
}
