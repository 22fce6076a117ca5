//! Proximal policy optimization for the CNOT environment, written against
//! plain slices: MLP actor-critic, GAE, clipped surrogate, Adam.

mod adam;
pub mod checkpoint;
mod eval;
mod gae;
mod loss;
mod net;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

pub use adam::{clip_grad_norm, Adam};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointMeta};
pub use eval::{evaluate_best_of, BestOf};
pub use gae::{compute_gae, normalize};
pub use loss::{ppo_loss, LossCoefficients, LossInputs, LossParts};
pub use net::{log_softmax, sample_action, softmax, Architecture, ForwardCache, ForwardOut, PolicyParams};
pub use train::{train, PhaseStats, TrainConfig, TrainingLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip_ratio: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub epochs_per_update: usize,
    pub rollout_horizon: usize,
    pub minibatch: usize,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_ratio: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            epochs_per_update: 10,
            rollout_horizon: 2048,
            minibatch: 64,
            value_coeff: 0.5,
            entropy_coeff: 0.01,
            grad_clip: 0.5,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("ppo: {what}")));
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return bad("clip_ratio must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gamma and gae_lambda must lie in (0, 1]");
        }
        if self.epochs_per_update == 0 || self.rollout_horizon == 0 || self.minibatch == 0 {
            return bad("epochs, horizon and minibatch must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.grad_clip > 0.0) {
            return bad("learning_rate and grad_clip must be positive");
        }
        Ok(())
    }

    fn coefficients<T: Scalar>(&self) -> LossCoefficients<T> {
        LossCoefficients {
            clip_ratio: T::lit(self.clip_ratio),
            value_coeff: T::lit(self.value_coeff),
            entropy_coeff: T::lit(self.entropy_coeff),
        }
    }
}

/// Rollout data for one update, aligned by step.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryBatch<T> {
    /// `len x input`, row-major.
    pub observations: Vec<T>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<T>,
    pub rewards: Vec<T>,
    pub values: Vec<T>,
    pub dones: Vec<bool>,
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
}

impl<T: Scalar> TrajectoryBatch<T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn check(&self, input: usize) -> Result<()> {
        let n = self.len();
        let aligned = self.observations.len() == n * input
            && [self.log_probs.len(), self.advantages.len(), self.returns.len()]
                .iter()
                .all(|&l| l == n);
        if aligned {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left: n,
                right: self.advantages.len(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Clip fraction of the first minibatch; zero right after a sync.
    pub first_epoch_clip_fraction: f64,
    pub grad_norm: f64,
}

/// Policy parameters together with their optimizer state.
#[derive(Debug, Clone)]
pub struct Learner<T> {
    pub params: PolicyParams<T>,
    pub adam: Adam<T>,
}

impl<T: Scalar> Learner<T> {
    pub fn new(params: PolicyParams<T>, learning_rate: f64) -> Self {
        let adam = Adam::new(params.flat().len(), T::lit(learning_rate));
        Self { params, adam }
    }

    /// Several epochs of shuffled minibatch steps on `batch`. Advantages are
    /// normalized once over the whole batch first. Aborts before touching the
    /// parameters if a minibatch loss is not finite.
    pub fn update(&mut self, batch: &TrajectoryBatch<T>, cfg: &PpoConfig, rng: &mut Rng) -> Result<UpdateMetrics> {
        if batch.is_empty() {
            return Err(Error::Config("ppo update on an empty batch".into()));
        }
        batch.check(self.params.arch().input)?;
        let mut adv = batch.advantages.clone();
        normalize(&mut adv);
        let data = LossInputs {
            obs: &batch.observations,
            actions: &batch.actions,
            old_log_probs: &batch.log_probs,
            advantages: &adv,
            returns: &batch.returns,
        };
        let coef = cfg.coefficients::<T>();
        let clip = T::lit(cfg.grad_clip);

        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut metrics = UpdateMetrics::default();
        let mut steps = 0usize;
        for epoch in 0..cfg.epochs_per_update {
            rng.shuffle(&mut order);
            for idx in order.chunks(cfg.minibatch) {
                let mut grad = vec![T::zero(); self.params.flat().len()];
                let parts = ppo_loss(&self.params, data, idx, coef, Some(&mut grad));
                if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFiniteLoss(format!(
                        "epoch {epoch}: policy {} value {} entropy {}",
                        parts.policy, parts.value, parts.entropy
                    )));
                }
                let norm = clip_grad_norm(&mut grad, clip);
                self.adam.step(self.params.flat_mut(), &grad);

                metrics.policy_loss += parts.policy.as_f64();
                metrics.value_loss += parts.value.as_f64();
                metrics.entropy += parts.entropy.as_f64();
                metrics.approx_kl += parts.approx_kl.as_f64();
                metrics.clip_fraction += parts.clip_fraction.as_f64();
                metrics.grad_norm += norm.as_f64();
                if steps == 0 {
                    metrics.first_epoch_clip_fraction = parts.clip_fraction.as_f64();
                }
                steps += 1;
            }
        }
        let s = steps as f64;
        metrics.policy_loss /= s;
        metrics.value_loss /= s;
        metrics.entropy /= s;
        metrics.approx_kl /= s;
        metrics.clip_fraction /= s;
        metrics.grad_norm /= s;
        Ok(metrics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_batch(arch: &Architecture, len: usize, rng: &mut Rng, params: &PolicyParams<f64>) -> TrajectoryBatch<f64> {
        let obs: Vec<f64> = (0..len * arch.input).map(|_| rng.bit() as u8 as f64).collect();
        let out = params.forward_batch(&obs, len).unwrap();
        let actions: Vec<usize> = (0..len).map(|_| rng.below(arch.actions)).collect();
        let log_probs = (0..len)
            .map(|b| log_softmax(&out.logits[b * arch.actions..(b + 1) * arch.actions])[actions[b]])
            .collect();
        TrajectoryBatch {
            observations: obs,
            actions,
            log_probs,
            rewards: vec![0.0; len],
            values: out.values.clone(),
            dones: vec![false; len],
            advantages: (0..len).map(|_| rng.normal()).collect(),
            returns: (0..len).map(|_| rng.normal()).collect(),
        }
    }

    #[test]
    fn first_minibatch_after_sync_is_unclipped() {
        let arch = Architecture::for_matrix(3, &[16]);
        let mut rng = Rng::seed(1);
        let params = PolicyParams::<f64>::init(arch.clone(), &mut rng);
        let batch = synthetic_batch(&arch, 128, &mut rng, &params);
        let mut learner = Learner::new(params, 3e-4);
        let m = learner.update(&batch, &PpoConfig::default(), &mut rng).unwrap();
        assert_eq!(m.first_epoch_clip_fraction, 0.0);
        assert!(learner.params.is_finite());
    }

    #[test]
    fn value_loss_decreases_on_fixed_batch() {
        let arch = Architecture::for_matrix(3, &[16, 16]);
        let mut rng = Rng::seed(2);
        let params = PolicyParams::<f64>::init(arch.clone(), &mut rng);
        let mut batch = synthetic_batch(&arch, 64, &mut rng, &params);
        // a target the value head can represent
        batch.returns = batch
            .observations
            .chunks(arch.input)
            .map(|o| o.iter().sum::<f64>() / arch.input as f64 - 0.5)
            .collect();
        let mut learner = Learner::new(params, 1e-3);
        let cfg = PpoConfig {
            epochs_per_update: 1,
            ..PpoConfig::default()
        };
        let idx: Vec<usize> = (0..64).collect();
        let value_loss = |p: &PolicyParams<f64>| {
            let mut adv = batch.advantages.clone();
            normalize(&mut adv);
            let data = LossInputs {
                obs: &batch.observations,
                actions: &batch.actions,
                old_log_probs: &batch.log_probs,
                advantages: &adv,
                returns: &batch.returns,
            };
            ppo_loss(p, data, &idx, cfg.coefficients(), None).value
        };
        let before = value_loss(&learner.params);
        for _ in 0..50 {
            learner.update(&batch, &cfg, &mut rng).unwrap();
        }
        let after = value_loss(&learner.params);
        assert!(after < 0.5 * before, "{before} -> {after}");
    }

    #[test]
    fn non_finite_batch_aborts() {
        let arch = Architecture::for_matrix(3, &[4]);
        let mut rng = Rng::seed(3);
        let params = PolicyParams::<f64>::init(arch.clone(), &mut rng);
        let mut batch = synthetic_batch(&arch, 8, &mut rng, &params);
        batch.returns[0] = f64::NAN;
        let mut learner = Learner::new(params.clone(), 3e-4);
        assert!(matches!(
            learner.update(&batch, &PpoConfig::default(), &mut rng),
            Err(Error::NonFiniteLoss(_))
        ));
        assert_eq!(learner.params, params);
    }

    #[test]
    fn config_validation() {
        assert!(PpoConfig::default().validate().is_ok());
        let bad = PpoConfig {
            clip_ratio: 1.5,
            ..PpoConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PpoConfig {
            gamma: 0.0,
            ..PpoConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
