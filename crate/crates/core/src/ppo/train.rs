//! Curriculum training loop: lockstep environments feed one learner.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::LogBase;
use crate::rlenv::{default_max_steps, sample_start, CnotEnv, RewardSpec, Schedule};
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::checkpoint::{write_checkpoint, CheckpointMeta};
use super::gae::compute_gae;
use super::net::{log_softmax, sample_action, Architecture, PolicyParams};
use super::{Learner, PpoConfig, TrajectoryBatch, UpdateMetrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub m: usize,
    pub hidden: Vec<usize>,
    /// Episode cap; `None` means `3 m^2`.
    pub max_steps: Option<usize>,
    /// Environments stepped in lockstep per rollout.
    pub n_envs: usize,
    pub log_base: LogBase,
    pub reward: RewardSpec<f64>,
    pub ppo: PpoConfig,
    /// Where phase-boundary checkpoints go; nothing is written when unset.
    #[serde(skip)]
    pub checkpoint_dir: Option<PathBuf>,
}

impl TrainConfig {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            hidden: vec![128, 128],
            max_steps: None,
            n_envs: 8,
            log_base: LogBase::Natural,
            reward: RewardSpec::default(),
            ppo: PpoConfig::default(),
            checkpoint_dir: None,
        }
    }

    pub fn episode_cap(&self) -> usize {
        self.max_steps.unwrap_or_else(|| default_max_steps(self.m))
    }

    pub fn architecture(&self) -> Architecture {
        Architecture::for_matrix(self.m, &self.hidden)
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        if self.m < 2 || self.m > 16 {
            return Err(Error::Config(format!("train: m = {} outside 2..=16", self.m)));
        }
        if self.n_envs == 0 || self.episode_cap() == 0 {
            return Err(Error::Config("train: n_envs and max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub start: usize,
    pub end: usize,
    pub episodes: usize,
    pub solved: usize,
    pub total_length: usize,
}

impl PhaseStats {
    pub fn solve_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.solved as f64 / self.episodes as f64
        }
    }

    pub fn mean_length(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.total_length as f64 / self.episodes as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub phases: Vec<PhaseStats>,
    pub updates: Vec<UpdateMetrics>,
    pub env_steps: usize,
    pub checkpoints: Vec<PathBuf>,
}

struct Slot<T> {
    env: CnotEnv<T>,
    rng: Rng,
    episode: Option<usize>,
    phase: usize,
    buf: TrajectoryBatch<T>,
}

/// Trains a fresh policy through every episode of `schedule`.
///
/// Environment `e` draws from its own stream; new episodes are handed out in
/// environment order, so the run depends only on the seed.
pub fn train<T: Scalar>(cfg: &TrainConfig, schedule: &Schedule) -> Result<(PolicyParams<T>, TrainingLog)> {
    cfg.validate()?;
    let seed = cfg.ppo.seed;
    let mut init_rng = Rng::with_stream(seed, u64::MAX);
    let params = PolicyParams::<T>::init(cfg.architecture(), &mut init_rng);
    let mut learner = Learner::new(params, cfg.ppo.learning_rate);
    let mut update_rng = Rng::with_stream(seed, u64::MAX - 1);

    let reward = RewardSpec {
        solve_bonus: T::lit(cfg.reward.solve_bonus),
        diag_coeff: T::lit(cfg.reward.diag_coeff),
        offdiag_coeff: T::lit(cfg.reward.offdiag_coeff),
        idle_penalty: T::lit(cfg.reward.idle_penalty),
    };
    let mut slots = Vec::with_capacity(cfg.n_envs);
    for e in 0..cfg.n_envs {
        slots.push(Slot {
            env: CnotEnv::new(cfg.m, cfg.episode_cap(), reward)?,
            rng: Rng::with_stream(seed, e as u64),
            episode: None,
            phase: 0,
            buf: TrajectoryBatch::default(),
        });
    }

    let mut log = TrainingLog {
        phases: schedule
            .phases()
            .iter()
            .map(|p| PhaseStats {
                start: p.start,
                end: p.end,
                ..PhaseStats::default()
            })
            .collect(),
        ..TrainingLog::default()
    };
    let total = schedule.total();
    let mut next_episode = 0usize;
    let mut finished = 0usize;
    let mut next_checkpoint_phase = 0usize;
    let per_env = cfg.ppo.rollout_horizon.div_ceil(cfg.n_envs).max(1);
    let gamma = T::lit(cfg.ppo.gamma);
    let lambda = T::lit(cfg.ppo.gae_lambda);
    let input = cfg.m * cfg.m;
    let actions = cfg.m * (cfg.m - 1);
    let mut obs_one = Vec::with_capacity(input);

    while finished < total {
        for s in &mut slots {
            s.buf = TrajectoryBatch::default();
        }
        for _ in 0..per_env {
            // hand out episodes in environment order
            for s in &mut slots {
                if s.episode.is_none() && next_episode < total {
                    let start = sample_start(next_episode, schedule, cfg.m, cfg.log_base, &mut s.rng)?;
                    s.env.reset(start)?;
                    s.phase = schedule.phase_index(next_episode)?;
                    s.episode = Some(next_episode);
                    next_episode += 1;
                }
            }
            let active: Vec<usize> = (0..slots.len()).filter(|&e| slots[e].episode.is_some()).collect();
            if active.is_empty() {
                break;
            }
            let mut obs = Vec::with_capacity(active.len() * input);
            for &e in &active {
                slots[e].env.observe(&mut obs_one);
                obs.extend_from_slice(&obs_one);
            }
            let out = learner.params.forward_batch(&obs, active.len())?;
            for (b, &e) in active.iter().enumerate() {
                let s = &mut slots[e];
                let logits = &out.logits[b * actions..(b + 1) * actions];
                let a = sample_action(logits, &mut s.rng);
                let logp = log_softmax(logits)[a];
                let step = s.env.step(a)?;
                s.buf.observations.extend_from_slice(&obs[b * input..(b + 1) * input]);
                s.buf.actions.push(a);
                s.buf.log_probs.push(logp);
                s.buf.values.push(out.values[b]);
                s.buf.rewards.push(step.reward);
                // truncation is treated like termination
                s.buf.dones.push(step.done);
                log.env_steps += 1;
                if step.done {
                    let st = &mut log.phases[s.phase];
                    st.episodes += 1;
                    st.total_length += s.env.state().steps_taken;
                    if step.solved {
                        st.solved += 1;
                    }
                    s.episode = None;
                    finished += 1;
                }
            }
        }

        // bootstrap values for environments cut off mid-episode
        let open: Vec<usize> = (0..slots.len())
            .filter(|&e| slots[e].episode.is_some() && !slots[e].buf.is_empty())
            .collect();
        let mut bootstrap = vec![T::zero(); slots.len()];
        if !open.is_empty() {
            let mut obs = Vec::with_capacity(open.len() * input);
            for &e in &open {
                slots[e].env.observe(&mut obs_one);
                obs.extend_from_slice(&obs_one);
            }
            let out = learner.params.forward_batch(&obs, open.len())?;
            for (b, &e) in open.iter().enumerate() {
                bootstrap[e] = out.values[b];
            }
        }

        let mut batch = TrajectoryBatch::default();
        for (e, s) in slots.iter_mut().enumerate() {
            if s.buf.is_empty() {
                continue;
            }
            let mut values = s.buf.values.clone();
            values.push(bootstrap[e]);
            let (adv, ret) = compute_gae(&s.buf.rewards, &values, &s.buf.dones, gamma, lambda)?;
            s.buf.advantages = adv;
            s.buf.returns = ret;
            append(&mut batch, &s.buf);
        }
        if batch.is_empty() {
            break;
        }
        let metrics = learner.update(&batch, &cfg.ppo, &mut update_rng)?;
        log.updates.push(metrics);

        while next_checkpoint_phase < log.phases.len() && finished >= log.phases[next_checkpoint_phase].end {
            if let Some(dir) = &cfg.checkpoint_dir {
                fs::create_dir_all(dir)?;
                let path = dir.join(format!("phase_{next_checkpoint_phase}.ckpt"));
                let meta = CheckpointMeta::new(cfg, Some(next_checkpoint_phase), finished);
                write_checkpoint(&path, &learner.params.cast::<f32>(), &meta)?;
                log.checkpoints.push(path);
            }
            next_checkpoint_phase += 1;
        }
    }
    Ok((learner.params, log))
}

fn append<T: Scalar>(dst: &mut TrajectoryBatch<T>, src: &TrajectoryBatch<T>) {
    dst.observations.extend_from_slice(&src.observations);
    dst.actions.extend_from_slice(&src.actions);
    dst.log_probs.extend_from_slice(&src.log_probs);
    dst.rewards.extend_from_slice(&src.rewards);
    dst.values.extend_from_slice(&src.values);
    dst.dones.extend_from_slice(&src.dones);
    dst.advantages.extend_from_slice(&src.advantages);
    dst.returns.extend_from_slice(&src.returns);
}
