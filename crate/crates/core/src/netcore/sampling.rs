//! Softmax policies over logits with optional legal-action masks.

use rand::Rng;

use super::NetError;
use crate::scalar::Scalar;

/// Softmax of `logits / temperature`; masked-out entries get exactly zero.
pub fn masked_softmax<T: Scalar>(logits: &[T], mask: Option<&[bool]>, temperature: T) -> Result<Vec<T>, NetError> {
    if temperature <= T::zero() || !temperature.is_finite() {
        return Err(NetError::Config("temperature must be positive".into()));
    }
    if let Some(m) = mask {
        if m.len() != logits.len() {
            return Err(NetError::Config("mask length differs from logits".into()));
        }
        if !m.iter().any(|&b| b) {
            return Err(NetError::AllMasked);
        }
    }
    let allowed = |i: usize| mask.map_or(true, |m| m[i]);
    let max = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, &l)| l / temperature)
        .fold(T::neg_infinity(), T::max);
    let mut probs: Vec<T> = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| if allowed(i) { (l / temperature - max).exp() } else { T::zero() })
        .collect();
    let z: T = probs.iter().copied().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    Ok(probs)
}

/// Log-softmax at temperature one; masked entries are `-inf`.
pub fn masked_log_softmax<T: Scalar>(logits: &[T], mask: Option<&[bool]>) -> Result<Vec<T>, NetError> {
    if let Some(m) = mask {
        if m.len() != logits.len() {
            return Err(NetError::Config("mask length differs from logits".into()));
        }
        if !m.iter().any(|&b| b) {
            return Err(NetError::AllMasked);
        }
    }
    let allowed = |i: usize| mask.map_or(true, |m| m[i]);
    let max = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, &l)| l)
        .fold(T::neg_infinity(), T::max);
    let lse = max
        + logits
            .iter()
            .enumerate()
            .filter(|(i, _)| allowed(*i))
            .map(|(_, &l)| (l - max).exp())
            .sum::<T>()
            .ln();
    Ok(logits
        .iter()
        .enumerate()
        .map(|(i, &l)| if allowed(i) { l - lse } else { T::neg_infinity() })
        .collect())
}

/// Draws an action and returns it with its log-probability under the
/// (masked, tempered) softmax.
pub fn sample_action<T: Scalar, R: Rng + ?Sized>(
    logits: &[T],
    mask: Option<&[bool]>,
    temperature: T,
    rng: &mut R,
) -> Result<(usize, T), NetError> {
    let probs = masked_softmax(logits, mask, temperature)?;
    let u = T::lit(rng.gen::<f64>());
    let mut acc = T::zero();
    let mut chosen = None;
    for (i, &p) in probs.iter().enumerate() {
        if p == T::zero() {
            continue;
        }
        acc += p;
        chosen = Some(i);
        if u < acc {
            break;
        }
    }
    let a = chosen.ok_or(NetError::AllMasked)?;
    Ok((a, probs[a].ln()))
}

/// Highest-probability legal action.
pub fn greedy_action<T: Scalar>(logits: &[T], mask: Option<&[bool]>) -> Result<usize, NetError> {
    let mut best: Option<(usize, T)> = None;
    for (i, &l) in logits.iter().enumerate() {
        if mask.map_or(true, |m| m[i]) && best.map_or(true, |(_, b)| l > b) {
            best = Some((i, l));
        }
    }
    best.map(|(i, _)| i).ok_or(NetError::AllMasked)
}
