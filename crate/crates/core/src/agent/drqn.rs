//! Recurrent Q-learning baseline: one value head per valid action,
//! epsilon-greedy exploration, one-step TD targets from a slow target copy,
//! and the same episodic sequence replay as the actor-critic learner.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use std::path::Path;
use thiserror::Error;

use crate::actspace::{decode_flat, map_to_valid, ActionSpaces, ValidAction};
use crate::env::{NetworkConfig, Observation};
use crate::mat::Mat;
use crate::nn::{
    ema_blend_net, read_checkpoint, write_checkpoint, CheckpointError, NetState, RecurrentNet,
    RmsProp, BLOCK_COUNT, BLOCK_NAMES,
};
use crate::replay::{EpisodeRun, ReplayBuffer, ReplayError};

use super::{normalize_obs, obs_dim, DrqnConfig, TrainConfig, TrainLosses};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DrqnError {
    #[error("action space too large for value heads: {total} valid actions > cap {cap}")]
    ActionSpaceTooLarge { total: u64, cap: u64 },
}

/// Linear anneal from `start` to `end` over `total` acting slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsSchedule {
    pub start: f64,
    pub end: f64,
    pub total: u64,
}

impl EpsSchedule {
    pub fn at(&self, step: u64) -> f64 {
        if self.total == 0 || step >= self.total {
            return self.end;
        }
        let frac = step as f64 / self.total as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug)]
pub struct DrqnLearner {
    pub ncfg: NetworkConfig,
    pub tcfg: TrainConfig,
    pub dcfg: DrqnConfig,
    pub spaces: ActionSpaces,
    pub qnet: RecurrentNet,
    pub target: RecurrentNet,
    pub schedule: EpsSchedule,
    opt: RmsProp,
    act_state: NetState,
    eval_state: NetState,
    anneal_step: u64,
}

impl DrqnLearner {
    pub fn new(
        ncfg: NetworkConfig,
        tcfg: TrainConfig,
        dcfg: DrqnConfig,
        spaces: ActionSpaces,
        init_seed: u64,
    ) -> Result<Self, DrqnError> {
        if spaces.total_valid > dcfg.action_cap {
            return Err(DrqnError::ActionSpaceTooLarge { total: spaces.total_valid, cap: dcfg.action_cap });
        }
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(init_seed);
        let d = obs_dim(&ncfg);
        let w = tcfg.hidden_width;
        let qnet = RecurrentNet::new(d, w, spaces.total_valid as usize, &mut rng);
        let target = qnet.clone();
        let opt = RmsProp::new(&qnet, tcfg.lr_critic, tcfg.rmsprop_decay, tcfg.rmsprop_eps);
        // Anneal across the early fraction of the training phase, then hold
        // at the floor.
        let train_episodes = tcfg.episodes.saturating_sub(tcfg.start_episode) as u64;
        let train_slots = train_episodes * tcfg.slots_per_episode as u64;
        let schedule = EpsSchedule {
            start: dcfg.eps_start,
            end: dcfg.eps_end,
            total: (train_slots as f64 * dcfg.eps_anneal_frac).round() as u64,
        };
        Ok(DrqnLearner {
            ncfg,
            tcfg,
            dcfg,
            spaces,
            qnet,
            target,
            schedule,
            opt,
            act_state: NetState::zeros(1, w),
            eval_state: NetState::zeros(1, w),
            anneal_step: 0,
        })
    }

    pub fn begin_episode(&mut self) {
        self.act_state = NetState::zeros(1, self.tcfg.hidden_width);
    }

    pub fn begin_eval_episode(&mut self) {
        self.eval_state = NetState::zeros(1, self.tcfg.hidden_width);
    }

    fn greedy_index(q_row: &[f64]) -> u64 {
        let mut best = 0usize;
        for (i, &v) in q_row.iter().enumerate() {
            if v > q_row[best] {
                best = i;
            }
        }
        best as u64
    }

    /// Behavior step: epsilon-greedy with the annealed rate once training has
    /// begun (epsilon stays at `start` while the replay warms up).
    pub fn act(&mut self, obs: &Observation, rng: &mut ChaCha12Rng, annealing: bool) -> (ValidAction, u64) {
        let eps = if annealing {
            let e = self.schedule.at(self.anneal_step);
            self.anneal_step += 1;
            e
        } else {
            self.schedule.start
        };
        let x = Mat::from_rows(vec![normalize_obs(obs, &self.ncfg)]);
        let q = self.qnet.forward_step(&x, &mut self.act_state);
        let idx =
            if rng.gen::<f64>() < eps { rng.gen_range(0..self.spaces.total_valid) } else { Self::greedy_index(q.row(0)) };
        (self.index_to_action(idx), idx)
    }

    /// Evaluation step at the fixed evaluation exploration rate (or fully
    /// greedy when `deterministic`).
    pub fn act_eval(&mut self, obs: &Observation, rng: &mut ChaCha12Rng, deterministic: bool) -> (ValidAction, u64) {
        let x = Mat::from_rows(vec![normalize_obs(obs, &self.ncfg)]);
        let q = self.qnet.forward_step(&x, &mut self.eval_state);
        let explore = !deterministic && rng.gen::<f64>() < self.dcfg.eps_eval;
        let idx =
            if explore { rng.gen_range(0..self.spaces.total_valid) } else { Self::greedy_index(q.row(0)) };
        (self.index_to_action(idx), idx)
    }

    pub fn index_to_action(&self, idx: u64) -> ValidAction {
        map_to_valid(&decode_flat(idx, &self.spaces), &self.spaces)
    }

    /// One-step TD update over a sampled batch of sequences:
    /// target = r + gamma * max_a Q_target(next_obs, a).
    pub fn train_step(
        &mut self,
        replay: &ReplayBuffer<u64>,
        rng: &mut ChaCha12Rng,
        episode: u32,
    ) -> Result<Option<TrainLosses>, ReplayError> {
        if episode <= self.tcfg.start_episode {
            return Ok(None);
        }
        let runs = replay.sample_sequences(self.tcfg.batch_episodes, self.tcfg.seq_len, rng)?;
        let loss = self.td_update(&runs);
        ema_blend_net(&mut self.target, &self.qnet, self.tcfg.tau);
        Ok(Some(TrainLosses { critic1: loss, critic2: f64::NAN, actor: f64::NAN }))
    }

    fn td_update(&mut self, runs: &[EpisodeRun<'_, u64>]) -> f64 {
        let lanes = runs.len();
        let len = runs[0].len();
        let d = obs_dim(&self.ncfg);
        let mut obs = Vec::with_capacity(len);
        let mut next_obs = Vec::with_capacity(len);
        for l in 0..len {
            let mut o = Mat::zeros(lanes, d);
            let mut no = Mat::zeros(lanes, d);
            for (b, run) in runs.iter().enumerate() {
                o.row_mut(b).copy_from_slice(&normalize_obs(&run.obs[l], &self.ncfg));
                no.row_mut(b).copy_from_slice(&normalize_obs(&run.obs[l + 1], &self.ncfg));
            }
            obs.push(o);
            next_obs.push(no);
        }
        let state0 = NetState::zeros(lanes, self.tcfg.hidden_width);
        let (qn, _, _) = self.target.forward_seq(next_obs, &state0);
        let (q, cache, _) = self.qnet.forward_seq(obs, &state0);
        let count = (len * lanes) as f64;
        let mut loss = 0.0;
        let mut dq: Vec<Mat> = q.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect();
        for l in 0..len {
            for (b, run) in runs.iter().enumerate() {
                let best_next = qn[l].row(b).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let tgt = run.rewards[l] as f64 + self.tcfg.discount * best_next;
                let idx = run.actions[l] as usize;
                let resid = q[l].get(b, idx) - tgt;
                loss += resid * resid;
                dq[l].set(b, idx, 2.0 * resid / count);
            }
        }
        let (grads, _) = self.qnet.backward_seq(&cache, &dq);
        self.opt.step(&mut self.qnet, &grads);
        loss / count
    }

    pub fn save_checkpoint(&self, path: &Path, meta: &[(String, String)]) -> Result<(), CheckpointError> {
        let mut blocks = Vec::new();
        for (net, name) in [(&self.qnet, "qnet"), (&self.target, "target")] {
            for i in 0..BLOCK_COUNT {
                blocks.push((format!("{name}.{}", BLOCK_NAMES[i]), net.block(i)));
            }
        }
        write_checkpoint(path, meta, &blocks)
    }

    pub fn load_checkpoint(&mut self, path: &Path) -> Result<(), CheckpointError> {
        let ckpt = read_checkpoint(path)?;
        for (net, name) in [(&mut self.qnet, "qnet"), (&mut self.target, "target")] {
            for i in 0..BLOCK_COUNT {
                let key = format!("{name}.{}", BLOCK_NAMES[i]);
                let data = ckpt.take_block(&key, net.block(i).len())?;
                net.block_mut(i).copy_from_slice(data);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actspace::{build_action_spaces, validate_action};
    use crate::env::default_config;
    use rand::SeedableRng;

    fn cfg_and_spaces(k: usize) -> (NetworkConfig, ActionSpaces) {
        let ncfg = default_config(k);
        let spaces = build_action_spaces(&ncfg).unwrap();
        (ncfg, spaces)
    }

    #[test]
    fn k3_builds_with_344_heads() {
        let (ncfg, spaces) = cfg_and_spaces(3);
        let mut tcfg = TrainConfig::table_defaults(ncfg.discount);
        tcfg.hidden_width = 8;
        let learner = DrqnLearner::new(ncfg, tcfg, DrqnConfig::default(), spaces, 1).unwrap();
        assert_eq!(learner.qnet.output_dim(), 344);
    }

    #[test]
    fn k7_exceeds_the_cap() {
        let (ncfg, spaces) = cfg_and_spaces(7);
        let tcfg = TrainConfig::table_defaults(ncfg.discount);
        let err = DrqnLearner::new(ncfg, tcfg, DrqnConfig::default(), spaces, 1).unwrap_err();
        assert_eq!(err, DrqnError::ActionSpaceTooLarge { total: 823_544, cap: 20_000 });
    }

    #[test]
    fn pure_exploration_is_uniform_over_valid_actions() {
        let (ncfg, spaces) = cfg_and_spaces(1);
        let mut tcfg = TrainConfig::table_defaults(ncfg.discount);
        tcfg.hidden_width = 8;
        let dcfg = DrqnConfig { eps_start: 1.0, ..DrqnConfig::default() };
        let mut learner = DrqnLearner::new(ncfg.clone(), tcfg, dcfg, spaces, 2).unwrap();
        let (_, obs) = crate::env::reset(&ncfg).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut counts = [0u32; 8];
        learner.begin_episode();
        for _ in 0..8000 {
            let (valid, idx) = learner.act(&obs, &mut rng, false);
            counts[idx as usize] += 1;
            assert!(validate_action(&valid, &ncfg));
        }
        for (i, &c) in counts.iter().enumerate() {
            assert!((c as f64 - 1000.0).abs() < 150.0, "index {i} drawn {c} times");
        }
    }

    #[test]
    fn eps_schedule_anneals_linearly() {
        let s = EpsSchedule { start: 1.0, end: 0.01, total: 100 };
        assert_eq!(s.at(0), 1.0);
        assert!((s.at(50) - 0.505).abs() < 1e-12);
        assert_eq!(s.at(100), 0.01);
        assert_eq!(s.at(10_000), 0.01);
    }

    #[test]
    fn greedy_argmax_breaks_ties_toward_the_lowest_index() {
        assert_eq!(DrqnLearner::greedy_index(&[0.0, 3.0, 3.0, -1.0]), 1);
        assert_eq!(DrqnLearner::greedy_index(&[5.0, 3.0, 5.0]), 0);
    }
}
