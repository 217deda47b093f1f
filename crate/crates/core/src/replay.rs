//! Episodic experience storage and contiguous-sequence sampling.
//!
//! Steps accumulate in a temporary episode; `end_episode` transfers it into
//! the main store, evicting the oldest episode beyond capacity. Training
//! batches draw whole episodes without replacement and a contiguous run of
//! tuples from each, never crossing an episode boundary.

use rand::Rng;
use thiserror::Error;

use crate::env::Observation;

/// One experience tuple. The action payload is learner-specific (primitive
/// action vector for the actor-critic learners, a flat action index for the
/// Q-learner).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceTuple<A> {
    pub obs: Observation,
    pub action: A,
    pub reward: i64,
    pub next_obs: Observation,
}

/// A completed episode, stored as the observation chain plus per-slot
/// actions and rewards. Tuple t is (obs[t], action[t], reward[t], obs[t+1]).
#[derive(Debug, Clone)]
pub struct ExperienceEpisode<A> {
    obs: Vec<Observation>,
    actions: Vec<A>,
    rewards: Vec<i64>,
}

impl<A: Clone> ExperienceEpisode<A> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn tuple(&self, t: usize) -> ExperienceTuple<A> {
        ExperienceTuple {
            obs: self.obs[t].clone(),
            action: self.actions[t].clone(),
            reward: self.rewards[t],
            next_obs: self.obs[t + 1].clone(),
        }
    }
}

/// A contiguous run of tuples inside one stored episode.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeRun<'a, A> {
    /// len + 1 observations: run tuple l is (obs[l], .., obs[l+1]).
    pub obs: &'a [Observation],
    pub actions: &'a [A],
    pub rewards: &'a [i64],
}

impl<'a, A> EpisodeRun<'a, A> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("tuple breaks the chain: its obs differs from the previous next_obs")]
    ChainBroken,
    #[error("end_episode on an empty temporary buffer")]
    EmptyEpisode,
    #[error("need {need} stored episodes of length >= {len}, have {have}")]
    InsufficientData { need: usize, len: usize, have: usize },
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer<A> {
    episodes: std::collections::VecDeque<ExperienceEpisode<A>>,
    temp: ExperienceEpisode<A>,
    capacity: usize,
}

impl<A: Clone> ReplayBuffer<A> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            episodes: std::collections::VecDeque::new(),
            temp: ExperienceEpisode { obs: Vec::new(), actions: Vec::new(), rewards: Vec::new() },
            capacity,
        }
    }

    pub fn stored_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn episode(&self, i: usize) -> &ExperienceEpisode<A> {
        &self.episodes[i]
    }

    /// Appends a tuple to the open episode, enforcing the chaining invariant.
    pub fn push_step(&mut self, tuple: ExperienceTuple<A>) -> Result<(), ReplayError> {
        match self.temp.obs.last() {
            None => {
                self.temp.obs.push(tuple.obs);
            }
            Some(last) => {
                if *last != tuple.obs {
                    return Err(ReplayError::ChainBroken);
                }
            }
        }
        self.temp.obs.push(tuple.next_obs);
        self.temp.actions.push(tuple.action);
        self.temp.rewards.push(tuple.reward);
        Ok(())
    }

    /// Transfers the temporary episode into the store, evicting the oldest
    /// episode beyond capacity.
    pub fn end_episode(&mut self) -> Result<(), ReplayError> {
        if self.temp.is_empty() {
            return Err(ReplayError::EmptyEpisode);
        }
        let done = std::mem::replace(
            &mut self.temp,
            ExperienceEpisode { obs: Vec::new(), actions: Vec::new(), rewards: Vec::new() },
        );
        self.episodes.push_back(done);
        while self.episodes.len() > self.capacity {
            self.episodes.pop_front();
        }
        Ok(())
    }

    /// Draws `count` distinct episodes uniformly, then a start slot uniform
    /// over the feasible range of each, returning contiguous runs of `len`
    /// tuples.
    pub fn sample_sequences(
        &self,
        count: usize,
        len: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<EpisodeRun<'_, A>>, ReplayError> {
        assert!(len > 0);
        let eligible: Vec<usize> =
            (0..self.episodes.len()).filter(|&i| self.episodes[i].len() >= len).collect();
        if eligible.len() < count {
            return Err(ReplayError::InsufficientData { need: count, len, have: eligible.len() });
        }
        // Partial Fisher-Yates over the eligible indices.
        let mut pool = eligible;
        let mut runs = Vec::with_capacity(count);
        for pick in 0..count {
            let j = pick + rng.gen_range(0..pool.len() - pick);
            pool.swap(pick, j);
            let ep = &self.episodes[pool[pick]];
            let start = rng.gen_range(0..=ep.len() - len);
            runs.push(EpisodeRun {
                obs: &ep.obs[start..start + len + 1],
                actions: &ep.actions[start..start + len],
                rewards: &ep.rewards[start..start + len],
            });
        }
        Ok(runs)
    }
}
