//! Policies and learners: the recurrent soft actor-critic stack with action
//! decomposition (and its flat-indexed variant), a recurrent Q-learning
//! baseline, and the random policy.

mod drqn;
mod random;
mod rss;

pub use drqn::{DrqnError, DrqnLearner, EpsSchedule};
pub use random::random_act;
pub use rss::{RssLearner, SeqBatch};

use crate::actspace::{decode_flat, discretize, map_to_valid, ActionSpaces, PrimitiveAction, ProtoAction, ValidAction};
use crate::env::{NetworkConfig, ObsBattery, Observation};

/// Training losses of one step: the two critic soft Bellman residuals and
/// the actor objective. The Q-learner reports its TD loss in `critic1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLosses {
    pub critic1: f64,
    pub critic2: f64,
    pub actor: f64,
}

/// Network input width for an observation: per sensor (G, X, battery), then
/// the AoCI.
pub fn obs_dim(config: &NetworkConfig) -> usize {
    3 * config.n() + 1
}

/// Normalizes an observation into [0,1]-scaled features; an unreported
/// battery maps to -1.
pub fn normalize_obs(obs: &Observation, config: &NetworkConfig) -> Vec<f64> {
    let n = config.n();
    let mut v = Vec::with_capacity(3 * n + 1);
    for s in 0..n {
        v.push(obs.g[s] as f64 / config.g_max as f64);
        v.push(obs.x[s] as f64 / config.x_max as f64);
        v.push(match obs.battery[s] {
            ObsBattery::Sentinel => -1.0,
            ObsBattery::Reported(e) => e as f64 / config.battery_cap[s] as f64,
        });
    }
    v.push(obs.aoci as f64 / config.aoci_max as f64);
    v
}

/// Numerical guards of the squashed-Gaussian policy head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquashCfg {
    pub log_scale_min: f64,
    pub log_scale_max: f64,
    /// Floor on the 1 - tanh(u)^2 correction term.
    pub floor: f64,
}

impl Default for SquashCfg {
    fn default() -> Self {
        SquashCfg { log_scale_min: -20.0, log_scale_max: 2.0, floor: 1e-6 }
    }
}

const LN_2PI: f64 = 1.8378770664093453;

/// One reparameterized draw of the policy head together with everything the
/// backward pass needs.
#[derive(Debug, Clone)]
pub struct SquashSample {
    /// Primitive action, component k in (0, sizes[k]).
    pub prim: Vec<f64>,
    pub log_prob: f64,
    pub tanh_u: Vec<f64>,
    /// exp of the clamped log scale.
    pub sigma: Vec<f64>,
    /// False where the log-scale clamp cut the gradient.
    pub scale_grad: Vec<bool>,
    /// False where the squash correction sits on its floor.
    pub corr_grad: Vec<bool>,
}

/// Applies the reparameterization u = mu + sigma * noise, squashes through
/// tanh, and rescales each component into its subspace interval. Returns the
/// primitive action and its exact log density (change of variables, with the
/// squash correction floored).
pub fn sample_primitive(
    mu: &[f64],
    log_scale: &[f64],
    noise: &[f64],
    sizes: &[f64],
    cfg: &SquashCfg,
) -> SquashSample {
    let k = mu.len();
    assert_eq!(log_scale.len(), k);
    assert_eq!(noise.len(), k);
    assert_eq!(sizes.len(), k);
    let mut prim = vec![0.0; k];
    let mut tanh_u = vec![0.0; k];
    let mut sigma = vec![0.0; k];
    let mut scale_grad = vec![false; k];
    let mut corr_grad = vec![false; k];
    let mut log_prob = 0.0;
    for i in 0..k {
        let ls = log_scale[i].clamp(cfg.log_scale_min, cfg.log_scale_max);
        scale_grad[i] = log_scale[i] > cfg.log_scale_min && log_scale[i] < cfg.log_scale_max;
        let s = ls.exp();
        let u = mu[i] + s * noise[i];
        let t = u.tanh();
        let corr = 1.0 - t * t;
        corr_grad[i] = corr > cfg.floor;
        sigma[i] = s;
        tanh_u[i] = t;
        prim[i] = (t + 1.0) / 2.0 * sizes[i];
        log_prob += -0.5 * LN_2PI - ls - 0.5 * noise[i] * noise[i];
        log_prob -= corr.max(cfg.floor).ln();
        log_prob -= (sizes[i] / 2.0).ln();
    }
    SquashSample { prim, log_prob, tanh_u, sigma, scale_grad, corr_grad }
}

/// Log density of a given primitive action under (mu, log_scale). Used by
/// the quadrature check; the training path goes through [`sample_primitive`].
pub fn log_prob_of_primitive(
    prim: &[f64],
    mu: &[f64],
    log_scale: &[f64],
    sizes: &[f64],
    cfg: &SquashCfg,
) -> f64 {
    let mut log_prob = 0.0;
    for i in 0..prim.len() {
        let ls = log_scale[i].clamp(cfg.log_scale_min, cfg.log_scale_max);
        let s = ls.exp();
        let t = 2.0 * prim[i] / sizes[i] - 1.0;
        let u = 0.5 * ((1.0 + t) / (1.0 - t)).ln(); // atanh
        let z = (u - mu[i]) / s;
        log_prob += -0.5 * LN_2PI - ls - 0.5 * z * z;
        log_prob -= (1.0 - t * t).max(cfg.floor).ln();
        log_prob -= (sizes[i] / 2.0).ln();
    }
    log_prob
}

/// How a primitive action becomes a valid action: per-CSP decomposition, or
/// one flat index over the whole valid-action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionCodec {
    /// K components, one per CSP subspace.
    Decomposed,
    /// A single component scaled to (0, |A|).
    Flat,
}

impl ActionCodec {
    /// Number of primitive-action components.
    pub fn dims(&self, spaces: &ActionSpaces) -> usize {
        match self {
            ActionCodec::Decomposed => spaces.subspaces.len(),
            ActionCodec::Flat => 1,
        }
    }

    /// Upper bound of each primitive component's interval.
    pub fn sizes(&self, spaces: &ActionSpaces) -> Vec<f64> {
        match self {
            ActionCodec::Decomposed => spaces.subspaces.iter().map(|s| s.size() as f64).collect(),
            ActionCodec::Flat => vec![spaces.total_valid as f64],
        }
    }

    pub fn to_valid(&self, prim: &PrimitiveAction, spaces: &ActionSpaces) -> ValidAction {
        match self {
            ActionCodec::Decomposed => map_to_valid(&discretize(prim, spaces), spaces),
            ActionCodec::Flat => {
                let idx = (prim.0[0].floor().max(0.0) as u64).min(spaces.total_valid - 1);
                map_to_valid(&decode_flat(idx, spaces), spaces)
            }
        }
    }

    pub fn proto(&self, prim: &PrimitiveAction, spaces: &ActionSpaces) -> ProtoAction {
        match self {
            ActionCodec::Decomposed => discretize(prim, spaces),
            ActionCodec::Flat => {
                let idx = (prim.0[0].floor().max(0.0) as u64).min(spaces.total_valid - 1);
                decode_flat(idx, spaces)
            }
        }
    }
}

/// Learning hyperparameters. Defaults follow the reference setting: RMSprop
/// at 5e-4 for actor and critics, target rate 1e-3, a replay of 10^3
/// episodes, training from episode 201 on, batches of 10 sequences of 50
/// tuples, temperature 2e-2, and 128-wide hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub discount: f64,
    /// Entropy temperature.
    pub alpha: f64,
    /// Target-network blend rate.
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Replay capacity in episodes.
    pub replay_capacity: usize,
    /// Episodes finished before training starts (W_s).
    pub start_episode: u32,
    /// Sequences per mini-batch (W_b).
    pub batch_episodes: usize,
    /// Tuples per sampled sequence (L).
    pub seq_len: usize,
    /// Training episodes (W).
    pub episodes: u32,
    /// Slots per episode (T_w).
    pub slots_per_episode: u32,
    /// Run one training step every this many slots.
    pub train_every: u32,
    pub hidden_width: usize,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    pub squash: SquashCfg,
}

impl TrainConfig {
    pub fn table_defaults(discount: f64) -> Self {
        TrainConfig {
            discount,
            alpha: 2e-2,
            tau: 1e-3,
            lr_actor: 5e-4,
            lr_critic: 5e-4,
            replay_capacity: 1000,
            start_episode: 200,
            batch_episodes: 10,
            seq_len: 50,
            episodes: 500,
            slots_per_episode: 1000,
            train_every: 1,
            hidden_width: 128,
            rmsprop_decay: 0.99,
            rmsprop_eps: 1e-8,
            squash: SquashCfg::default(),
        }
    }

    /// Desk-scale preset: 200 episodes of 300 slots, one training step every
    /// fourth slot, training from episode 21 so most of the run still
    /// learns.
    pub fn reduced_preset(discount: f64) -> Self {
        TrainConfig {
            episodes: 200,
            slots_per_episode: 300,
            train_every: 4,
            start_episode: 20,
            ..TrainConfig::table_defaults(discount)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(format!("discount {} must lie in [0, 1)", self.discount));
        }
        if self.alpha < 0.0 {
            return Err("alpha must be non-negative".into());
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(format!("tau {} must lie in (0, 1]", self.tau));
        }
        if self.seq_len == 0 || self.seq_len as u32 > self.slots_per_episode {
            return Err(format!(
                "seq_len {} must lie in 1..=slots_per_episode ({})",
                self.seq_len, self.slots_per_episode
            ));
        }
        if self.batch_episodes == 0 || self.batch_episodes > self.replay_capacity {
            return Err("batch_episodes must fit the replay capacity".into());
        }
        if (self.start_episode as usize) < self.batch_episodes {
            return Err(format!(
                "start_episode {} must be at least batch_episodes {} so the replay can supply full batches",
                self.start_episode, self.batch_episodes
            ));
        }
        if self.train_every == 0 {
            return Err("train_every must be positive".into());
        }
        if self.hidden_width == 0 {
            return Err("hidden_width must be positive".into());
        }
        Ok(())
    }
}

/// Q-learner specifics: flat action heads plus epsilon-greedy exploration.
#[derive(Debug, Clone, PartialEq)]
pub struct DrqnConfig {
    /// Refuse to build output heads beyond this many valid actions.
    pub action_cap: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Exploration rate used during evaluation episodes.
    pub eps_eval: f64,
    /// Fraction of the training-phase acting slots over which epsilon
    /// anneals; it stays at eps_end afterwards.
    pub eps_anneal_frac: f64,
}

impl Default for DrqnConfig {
    fn default() -> Self {
        DrqnConfig {
            action_cap: 20_000,
            eps_start: 1.0,
            eps_end: 0.01,
            eps_eval: 0.05,
            eps_anneal_frac: 0.2,
        }
    }
}

/// Entropy-regularized bootstrap target:
/// r + gamma * (min_j Qbar_j - alpha * log pi(next action)).
pub fn soft_target(
    reward: f64,
    gamma: f64,
    alpha: f64,
    q1_target: f64,
    q2_target: f64,
    next_log_prob: f64,
) -> f64 {
    reward + gamma * (q1_target.min(q2_target) - alpha * next_log_prob)
}
