use crate::scalar::Scalar;

/// Generalized advantage estimation over one trajectory segment.
///
/// `terminals[t]` marks that the episode ended after step `t`; the value of
/// the following state is then taken as zero. `bootstrap` is `V_old` of the
/// state after the last step (ignored when that step is terminal). Returns
/// `(advantages, returns)` with `returns = values_old + advantages`.
pub fn compute_gae<T: Scalar>(
    rewards: &[T],
    values_old: &[T],
    terminals: &[bool],
    bootstrap: T,
    gamma: T,
    lambda: T,
) -> (Vec<T>, Vec<T>) {
    let n = rewards.len();
    assert!(
        values_old.len() == n && terminals.len() == n,
        "rewards, values and terminals must share a length"
    );
    let mut adv = vec![T::zero(); n];
    let mut running = T::zero();
    for t in (0..n).rev() {
        let next_value = if t + 1 == n { bootstrap } else { values_old[t + 1] };
        let live = if terminals[t] { T::zero() } else { T::one() };
        let delta = rewards[t] + gamma * next_value * live - values_old[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values_old).map(|(&a, &v)| v + a).collect();
    (adv, returns)
}

/// Standardizes to mean 0 / std 1 (left centered only when the spread is ~0).
pub fn standardize<T: Scalar>(xs: &mut [T]) {
    if xs.is_empty() {
        return;
    }
    let n = T::from_usize(xs.len()).unwrap();
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let std = var.sqrt();
    let denom = if std > T::lit(1e-8) { std } else { T::one() };
    xs.iter_mut().for_each(|x| *x = (*x - mean) / denom);
}
