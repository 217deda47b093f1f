//! Experiment orchestration: configuration files, seeding, the
//! train/evaluate loop, metrics persistence, the exact soft-value oracle,
//! and everything the CLI calls into.

mod metrics;
mod oracle;
mod run;

pub use metrics::{metrics_header, read_metrics, MetricsRow};
pub use oracle::{
    oracle_soft_values, tiny_oracle_config, two_point_policy, FixedPolicy, OracleError, OracleReport,
};
pub use run::{run_evaluation, run_training, EvalSummary, RunArtifacts};

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::actspace::ActSpaceError;
use crate::agent::{DrqnConfig, DrqnError, TrainConfig};
use crate::env::{default_config, ConfigError, EnvError, NetworkConfig};
use crate::nn::CheckpointError;
use crate::replay::ReplayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Rss,
    RssWoa,
    Drqn,
    Random,
}

impl Algorithm {
    pub fn tag(&self) -> &'static str {
        match self {
            Algorithm::Rss => "rss",
            Algorithm::RssWoa => "rss-woa",
            Algorithm::Drqn => "drqn",
            Algorithm::Random => "random",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rss" => Ok(Algorithm::Rss),
            "rss-woa" => Ok(Algorithm::RssWoa),
            "drqn" => Ok(Algorithm::Drqn),
            "random" => Ok(Algorithm::Random),
            other => Err(format!("unknown algorithm {other:?} (expected rss, rss-woa, drqn, or random)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("network config: {0}")]
    Network(#[from] ConfigError),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("action space: {0}")]
    ActSpace(#[from] ActSpaceError),
    #[error("q-learner: {0}")]
    Drqn(#[from] DrqnError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("replay: {0}")]
    Replay(#[from] ReplayError),
}

/// A full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub drqn: DrqnConfig,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    /// Run one evaluation episode after every this many training episodes.
    pub eval_every: u32,
    pub output_dir: PathBuf,
    /// Use the policy mean instead of sampling during evaluation.
    pub deterministic_eval: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.network.validate()?;
        self.train.validate().map_err(HarnessError::Invalid)?;
        if self.seeds.is_empty() {
            return Err(HarnessError::Invalid("at least one seed is required".into()));
        }
        if self.eval_every == 0 {
            return Err(HarnessError::Invalid("eval_every must be positive".into()));
        }
        Ok(())
    }
}

/// The default scenario at a given number of CSPs.
pub fn default_experiment(k: usize, algorithm: Algorithm) -> ExperimentConfig {
    let network = default_config(k);
    let train = TrainConfig::table_defaults(network.discount);
    ExperimentConfig {
        network,
        train,
        drqn: DrqnConfig::default(),
        algorithm,
        seeds: (1..=6).collect(),
        eval_every: 1,
        output_dir: PathBuf::from("out"),
        deterministic_eval: false,
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let raw: RawConfig = toml::from_str(text)?;
    raw.build()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    algorithm: String,
    seeds: Vec<u64>,
    #[serde(default = "one")]
    eval_every: u32,
    #[serde(default = "default_out")]
    output_dir: String,
    network: RawNetwork,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    drqn: RawDrqn,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    channels_per_set: usize,
    discount: f64,
    g_max: Option<u32>,
    x_max: Option<u32>,
    aoci_max: Option<u32>,
    sets: Vec<RawSet>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSet {
    importances: Vec<f64>,
    failure_probs: Vec<f64>,
    eh_probs: Vec<f64>,
    battery_caps: Vec<u32>,
    threshold: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTrain {
    episodes: Option<u32>,
    slots_per_episode: Option<u32>,
    start_episode: Option<u32>,
    train_every: Option<u32>,
    replay_capacity: Option<usize>,
    batch_episodes: Option<usize>,
    seq_len: Option<usize>,
    alpha: Option<f64>,
    tau: Option<f64>,
    lr_actor: Option<f64>,
    lr_critic: Option<f64>,
    hidden_width: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawDrqn {
    action_cap: Option<u64>,
    eps_start: Option<f64>,
    eps_end: Option<f64>,
    eps_eval: Option<f64>,
    eps_anneal_frac: Option<f64>,
}

fn one() -> u32 {
    1
}

fn default_out() -> String {
    "out".into()
}

impl RawConfig {
    fn build(self) -> Result<ExperimentConfig, HarnessError> {
        let algorithm: Algorithm = self.algorithm.parse().map_err(HarnessError::Invalid)?;
        let k = self.network.sets.len();
        let mut sensor_sets = Vec::with_capacity(k);
        let mut failure_prob = Vec::new();
        let mut eh_prob = Vec::new();
        let mut battery_cap = Vec::new();
        let mut importance = Vec::new();
        let mut threshold = Vec::with_capacity(k);
        let mut next = 0usize;
        for set in &self.network.sets {
            let len = set.importances.len();
            sensor_sets.push((next..next + len).collect());
            next += len;
            failure_prob.extend_from_slice(&set.failure_probs);
            eh_prob.extend_from_slice(&set.eh_probs);
            battery_cap.extend_from_slice(&set.battery_caps);
            importance.extend_from_slice(&set.importances);
            threshold.push(set.threshold);
        }
        let n = next;
        let caps_default = (4 * n * k) as u32;
        let network = NetworkConfig {
            k,
            sensor_sets,
            m: self.network.channels_per_set,
            failure_prob,
            eh_prob,
            battery_cap,
            importance,
            threshold,
            g_max: self.network.g_max.unwrap_or(caps_default),
            x_max: self.network.x_max.unwrap_or(caps_default),
            aoci_max: self.network.aoci_max.unwrap_or(caps_default / 2),
            discount: self.network.discount,
        };
        let mut train = TrainConfig::table_defaults(network.discount);
        let r = self.train;
        if let Some(v) = r.episodes {
            train.episodes = v;
        }
        if let Some(v) = r.slots_per_episode {
            train.slots_per_episode = v;
        }
        if let Some(v) = r.start_episode {
            train.start_episode = v;
        }
        if let Some(v) = r.train_every {
            train.train_every = v;
        }
        if let Some(v) = r.replay_capacity {
            train.replay_capacity = v;
        }
        if let Some(v) = r.batch_episodes {
            train.batch_episodes = v;
        }
        if let Some(v) = r.seq_len {
            train.seq_len = v;
        }
        if let Some(v) = r.alpha {
            train.alpha = v;
        }
        if let Some(v) = r.tau {
            train.tau = v;
        }
        if let Some(v) = r.lr_actor {
            train.lr_actor = v;
        }
        if let Some(v) = r.lr_critic {
            train.lr_critic = v;
        }
        if let Some(v) = r.hidden_width {
            train.hidden_width = v;
        }
        let mut drqn = DrqnConfig::default();
        if let Some(v) = self.drqn.action_cap {
            drqn.action_cap = v;
        }
        if let Some(v) = self.drqn.eps_start {
            drqn.eps_start = v;
        }
        if let Some(v) = self.drqn.eps_end {
            drqn.eps_end = v;
        }
        if let Some(v) = self.drqn.eps_eval {
            drqn.eps_eval = v;
        }
        if let Some(v) = self.drqn.eps_anneal_frac {
            drqn.eps_anneal_frac = v;
        }
        let cfg = ExperimentConfig {
            network,
            train,
            drqn,
            algorithm,
            seeds: self.seeds,
            eval_every: self.eval_every,
            output_dir: PathBuf::from(self.output_dir),
            deterministic_eval: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
