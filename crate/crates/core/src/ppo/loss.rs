//! Clipped-surrogate PPO loss and its analytic gradient.
//!
//! For a minibatch of size `B` with ratio `r = exp(logp - logp_old)`:
//!
//! ```text
//! L = mean(-min(r A, clip(r, 1-eps, 1+eps) A))
//!   + c_v * mean((V - R)^2)
//!   - c_e * mean(H(pi))
//! ```

use rayon::prelude::*;

use crate::scalar::Scalar;

use super::net::{log_softmax, PolicyParams};

/// Rows per gradient work unit. Chunks are summed in index order, so the
/// result does not depend on how many threads run them.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy)]
pub struct LossCoefficients<T> {
    pub clip_ratio: T,
    pub value_coeff: T,
    pub entropy_coeff: T,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts<T> {
    pub total: T,
    pub policy: T,
    pub value: T,
    pub entropy: T,
    pub clip_fraction: T,
    pub approx_kl: T,
}

impl<T: Scalar> LossParts<T> {
    fn add(&mut self, o: &Self) {
        self.total += o.total;
        self.policy += o.policy;
        self.value += o.value;
        self.entropy += o.entropy;
        self.clip_fraction += o.clip_fraction;
        self.approx_kl += o.approx_kl;
    }
}

/// Views of the rollout data a loss evaluation reads.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a, T> {
    pub obs: &'a [T],
    pub actions: &'a [usize],
    pub old_log_probs: &'a [T],
    pub advantages: &'a [T],
    pub returns: &'a [T],
}

/// Loss over rows `idx` of `data`; when `grad` is given, the gradient is
/// added to it.
pub fn ppo_loss<T: Scalar>(
    params: &PolicyParams<T>,
    data: LossInputs<'_, T>,
    idx: &[usize],
    coef: LossCoefficients<T>,
    grad: Option<&mut [T]>,
) -> LossParts<T> {
    let scale = T::one() / T::from_usize(idx.len()).expect("batch size fits");
    let want_grad = grad.is_some();
    let parts: Vec<(LossParts<T>, Option<Vec<T>>)> = idx
        .par_chunks(CHUNK)
        .map(|rows| chunk_loss(params, data, rows, coef, scale, want_grad))
        .collect();
    let mut total = LossParts::default();
    if let Some(g) = grad {
        for (p, cg) in &parts {
            total.add(p);
            for (a, &b) in g.iter_mut().zip(cg.as_ref().expect("requested")) {
                *a += b;
            }
        }
    } else {
        parts.iter().for_each(|(p, _)| total.add(p));
    }
    total
}

fn chunk_loss<T: Scalar>(
    params: &PolicyParams<T>,
    data: LossInputs<'_, T>,
    rows: &[usize],
    coef: LossCoefficients<T>,
    scale: T,
    want_grad: bool,
) -> (LossParts<T>, Option<Vec<T>>) {
    let input = params.arch().input;
    let actions = params.arch().actions;
    let mut obs = Vec::with_capacity(rows.len() * input);
    for &r in rows {
        obs.extend_from_slice(&data.obs[r * input..(r + 1) * input]);
    }
    let out = params.forward_batch(&obs, rows.len()).expect("shapes checked by caller");

    let mut parts = LossParts::default();
    let mut dlogits = vec![T::zero(); rows.len() * actions];
    let mut dvalues = vec![T::zero(); rows.len()];
    let lo = T::one() - coef.clip_ratio;
    let hi = T::one() + coef.clip_ratio;
    let two = T::lit(2.0);

    for (b, &r) in rows.iter().enumerate() {
        let logp_all = log_softmax(&out.logits[b * actions..(b + 1) * actions]);
        let a = data.actions[r];
        let adv = data.advantages[r];
        let logp = logp_all[a];
        let log_ratio = logp - data.old_log_probs[r];
        let ratio = log_ratio.exp();
        let clipped = ratio.max(lo).min(hi);
        let unclipped_obj = ratio * adv;
        let clipped_obj = clipped * adv;
        let policy = -unclipped_obj.min(clipped_obj);

        let probs: Vec<T> = logp_all.iter().map(|&l| l.exp()).collect();
        let entropy = -probs.iter().zip(&logp_all).map(|(&p, &l)| p * l).sum::<T>();

        let err = out.values[b] - data.returns[r];
        parts.policy += policy * scale;
        parts.value += err * err * scale;
        parts.entropy += entropy * scale;
        parts.total += (policy + coef.value_coeff * err * err - coef.entropy_coeff * entropy) * scale;
        if (ratio - T::one()).abs() > coef.clip_ratio {
            parts.clip_fraction += scale;
        }
        // low-variance KL estimator (r - 1) - log r
        parts.approx_kl += ((ratio - T::one()) - log_ratio) * scale;

        if want_grad {
            // d(-min(rA, clip(r)A))/dr is -A on the unclipped branch, 0 otherwise.
            let dratio = if unclipped_obj <= clipped_obj { -adv } else { T::zero() };
            let dlogp = dratio * ratio;
            let dl = &mut dlogits[b * actions..(b + 1) * actions];
            for k in 0..actions {
                let onehot = if k == a { T::one() } else { T::zero() };
                let d_policy = dlogp * (onehot - probs[k]);
                // dH/dz_k = -p_k (log p_k + H)
                let d_entropy = -probs[k] * (logp_all[k] + entropy);
                dl[k] = (d_policy - coef.entropy_coeff * d_entropy) * scale;
            }
            dvalues[b] = coef.value_coeff * two * err * scale;
        }
    }

    let grad = want_grad.then(|| {
        let mut g = vec![T::zero(); params.flat().len()];
        params.backward(&out.cache, &dlogits, &dvalues, &mut g);
        g
    });
    (parts, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::net::Architecture;
    use crate::rng::Rng;

    struct Fixture {
        obs: Vec<f64>,
        actions: Vec<usize>,
        old: Vec<f64>,
        adv: Vec<f64>,
        ret: Vec<f64>,
    }

    impl Fixture {
        fn inputs(&self) -> LossInputs<'_, f64> {
            LossInputs {
                obs: &self.obs,
                actions: &self.actions,
                old_log_probs: &self.old,
                advantages: &self.adv,
                returns: &self.ret,
            }
        }
    }

    fn coef() -> LossCoefficients<f64> {
        LossCoefficients {
            clip_ratio: 0.2,
            value_coeff: 0.5,
            entropy_coeff: 0.01,
        }
    }

    fn fixture(params: &PolicyParams<f64>, rows: usize, rng: &mut Rng, shift: f64) -> Fixture {
        let input = params.arch().input;
        let actions = params.arch().actions;
        let obs: Vec<f64> = (0..rows * input).map(|_| rng.bit() as u8 as f64).collect();
        let out = params.forward_batch(&obs, rows).unwrap();
        let acts: Vec<usize> = (0..rows).map(|_| rng.below(actions)).collect();
        let old = (0..rows)
            .map(|b| {
                let lp = log_softmax(&out.logits[b * actions..(b + 1) * actions]);
                // move ratios to both sides of the clip window, away from its edges
                lp[acts[b]] + shift * (rng.unit_f64() - 0.5)
            })
            .collect();
        let adv = (0..rows).map(|_| rng.normal()).collect();
        let ret = (0..rows).map(|_| rng.normal()).collect();
        Fixture {
            obs,
            actions: acts,
            old,
            adv,
            ret,
        }
    }

    fn max_rel_error(params: &PolicyParams<f64>, fx: &Fixture) -> f64 {
        let idx: Vec<usize> = (0..fx.actions.len()).collect();
        let mut grad = vec![0.0; params.flat().len()];
        ppo_loss(params, fx.inputs(), &idx, coef(), Some(&mut grad));
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..params.flat().len() {
            let mut plus = params.clone();
            plus.flat_mut()[k] += h;
            let mut minus = params.clone();
            minus.flat_mut()[k] -= h;
            let fd = (ppo_loss(&plus, fx.inputs(), &idx, coef(), None).total
                - ppo_loss(&minus, fx.inputs(), &idx, coef(), None).total)
                / (2.0 * h);
            let denom = fd.abs().max(grad[k].abs()).max(1e-7);
            worst = worst.max((fd - grad[k]).abs() / denom);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences_toy() {
        // 1 input, 1 action: w_pi, b_pi, w_v, b_v -> four parameters
        let arch = Architecture {
            input: 1,
            hidden: vec![],
            actions: 1,
        };
        let mut rng = Rng::seed(1);
        let params = PolicyParams::<f64>::from_flat(arch, vec![0.3, -0.2, 0.8, 0.1]).unwrap();
        let mut fx = fixture(&params, 6, &mut rng, 0.6);
        fx.obs = vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        assert!(max_rel_error(&params, &fx) <= 1e-4);
    }

    #[test]
    fn gradient_matches_finite_differences_hidden() {
        let arch = Architecture {
            input: 4,
            hidden: vec![5, 3],
            actions: 6,
        };
        let mut rng = Rng::seed(2);
        let mut params = PolicyParams::<f64>::init(arch, &mut rng);
        for v in params.flat_mut() {
            *v += 0.3 * rng.normal();
        }
        let fx = fixture(&params, 37, &mut rng, 0.8);
        let err = max_rel_error(&params, &fx);
        assert!(err <= 1e-4, "max relative error {err}");
    }

    #[test]
    fn synced_policy_has_unit_ratio() {
        let arch = Architecture {
            input: 4,
            hidden: vec![8],
            actions: 5,
        };
        let mut rng = Rng::seed(3);
        let params = PolicyParams::<f64>::init(arch, &mut rng);
        let fx = fixture(&params, 20, &mut rng, 0.0);
        let idx: Vec<usize> = (0..20).collect();
        let parts = ppo_loss(&params, fx.inputs(), &idx, coef(), None);
        let mean_adv = fx.adv.iter().sum::<f64>() / 20.0;
        assert!((parts.policy + mean_adv).abs() < 1e-12);
        assert_eq!(parts.clip_fraction, 0.0);
        assert!(parts.approx_kl.abs() < 1e-15);
    }
}
