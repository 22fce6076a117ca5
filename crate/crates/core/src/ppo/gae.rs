//! Generalized advantage estimation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Advantages and returns for one trajectory segment.
///
/// `values` has one more entry than `rewards`: the last is the bootstrap value
/// of the state after the segment (ignored when the final step is terminal).
///
/// ```text
/// delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t
/// A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
/// R_t     = A_t + v_t
/// ```
pub fn compute_gae<T: Scalar>(rewards: &[T], values: &[T], dones: &[bool], gamma: T, lambda: T) -> Result<(Vec<T>, Vec<T>)> {
    let len = rewards.len();
    if values.len() != len + 1 || dones.len() != len {
        return Err(Error::DimensionMismatch {
            left: len,
            right: if dones.len() != len { dones.len() } else { values.len() },
        });
    }
    let mut adv = vec![T::zero(); len];
    let mut next = T::zero();
    for t in (0..len).rev() {
        let live = if dones[t] { T::zero() } else { T::one() };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let returns = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts and scales in place to mean 0, standard deviation 1.
pub fn normalize<T: Scalar>(xs: &mut [T]) {
    if xs.len() < 2 {
        return;
    }
    let n = T::from_usize(xs.len()).expect("length fits");
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let std = var.sqrt() + T::lit(1e-8);
    for x in xs {
        *x = (*x - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct sum `A_t = sum_l (gamma*lambda)^l delta_{t+l}`, truncated at the
    /// first terminal step.
    fn unrolled(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
        let len = rewards.len();
        let delta: Vec<f64> = (0..len)
            .map(|t| {
                let live = if dones[t] { 0.0 } else { 1.0 };
                rewards[t] + gamma * values[t + 1] * live - values[t]
            })
            .collect();
        (0..len)
            .map(|t| {
                let mut total = 0.0;
                let mut w = 1.0;
                for l in t..len {
                    total += w * delta[l];
                    if dones[l] {
                        break;
                    }
                    w *= gamma * lambda;
                }
                total
            })
            .collect()
    }

    #[test]
    fn single_terminal_step() {
        let (a, r) = compute_gae(&[0.7], &[0.0, 0.0], &[true], 0.99, 0.95).unwrap();
        assert_eq!(a, vec![0.7]);
        assert_eq!(r, vec![0.7]);
    }

    #[test]
    fn zero_discount_is_td_residual() {
        let rewards = [0.1f64, -0.2, 0.3];
        let values = [0.5, 0.4, 0.3, 0.2];
        let (a, _) = compute_gae(&rewards, &values, &[false, false, false], 0.0, 0.95).unwrap();
        for t in 0..3 {
            assert!((a[t] - (rewards[t] - values[t])).abs() < 1e-15);
        }
    }

    #[test]
    fn three_steps_closed_form() {
        // gamma = lambda = 0.5, no terminal, bootstrap v3 = 0.4.
        let r = [1.0f64, 0.0, 2.0];
        let v = [0.5, 0.25, 1.0, 0.4];
        let (a, ret) = compute_gae(&r, &v, &[false; 3], 0.5, 0.5).unwrap();
        // delta = [1 + 0.125 - 0.5, 0 + 0.5 - 0.25, 2 + 0.2 - 1] = [0.625, 0.25, 1.2]
        // A2 = 1.2, A1 = 0.25 + 0.25 * 1.2 = 0.55, A0 = 0.625 + 0.25 * 0.55 = 0.7625
        let expect = [0.7625, 0.55, 1.2];
        for t in 0..3 {
            assert!((a[t] - expect[t]).abs() < 1e-15);
            assert!((ret[t] - (expect[t] + v[t])).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_unrolled_on_five_steps() {
        let cases: [([f64; 5], [f64; 6], [bool; 5]); 3] = [
            ([0.1, 0.2, -0.3, 0.7, 0.0], [0.3, -0.1, 0.2, 0.5, 0.1, 0.9], [false, false, false, true, false]),
            ([-0.01, -0.01, 0.025, 0.7, -0.002], [0.0, 0.1, 0.2, 0.3, 0.4, 0.5], [false; 5]),
            ([0.7, 0.7, 0.0, 0.1, 0.2], [1.0, 1.0, 0.0, -1.0, 2.0, 3.0], [true, true, false, true, true]),
        ];
        for (r, v, d) in cases {
            let (a, _) = compute_gae(&r, &v, &d, 0.99, 0.95).unwrap();
            let oracle = unrolled(&r, &v, &d, 0.99, 0.95);
            for t in 0..5 {
                assert!((a[t] - oracle[t]).abs() < 1e-12, "t={t}: {} vs {}", a[t], oracle[t]);
            }
        }
    }

    #[test]
    fn rejects_misaligned() {
        assert!(compute_gae(&[0.0f64; 2], &[0.0; 2], &[false; 2], 0.9, 0.9).is_err());
        assert!(compute_gae(&[0.0f64; 2], &[0.0; 3], &[false; 1], 0.9, 0.9).is_err());
    }

    #[test]
    fn normalization() {
        let mut xs = vec![1.0f64, 2.0, 3.0, 4.0];
        normalize(&mut xs);
        let mean: f64 = xs.iter().sum::<f64>() / 4.0;
        let var: f64 = xs.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-6);
    }
}
