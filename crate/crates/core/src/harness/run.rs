//! The train/evaluate loop and standalone evaluation.
//!
//! Per seed: W training episodes of T_w slots with per-slot acting and
//! storing, training steps on the configured cadence once past the start
//! episode, then one evaluation episode with frozen parameters after each
//! training episode. Evaluation uses its own environment and policy streams
//! derived from (seed, episode), so it never perturbs training randomness.

use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::actspace::{build_action_spaces, ActionSpaces, ValidAction};
use crate::agent::{random_act, ActionCodec, DrqnLearner, RssLearner, TrainLosses};
use crate::env::{Env, Observation};
use crate::replay::{ExperienceTuple, ReplayBuffer};
use crate::seeds::{episode_seed, stream, sub_seed};

use super::metrics::{metrics_header, MetricsRow};
use super::{Algorithm, ExperimentConfig, HarnessError};

/// Outputs of one seed's run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub seed: u64,
    pub metrics_path: PathBuf,
    pub checkpoint_path: Option<PathBuf>,
    /// Mean evaluation reward over the final 50 evaluations.
    pub last50_mean: f64,
}

/// Summary of a standalone evaluation.
#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub episodes: u32,
    pub mean: f64,
    pub sd: f64,
    pub mre_mean: Vec<f64>,
    pub per_episode: Vec<f64>,
}

enum Policy {
    Rss(Box<RssLearner>, ReplayBuffer<Vec<f64>>),
    Drqn(Box<DrqnLearner>, ReplayBuffer<u64>),
    Random(ActionSpaces),
}

struct Pending {
    prim: Vec<f64>,
    index: u64,
}

impl Policy {
    fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Self, HarnessError> {
        let spaces = build_action_spaces(&cfg.network)?;
        let init = sub_seed(seed, stream::NET_INIT);
        Ok(match cfg.algorithm {
            Algorithm::Rss => Policy::Rss(
                Box::new(RssLearner::new(
                    cfg.network.clone(),
                    cfg.train.clone(),
                    spaces,
                    ActionCodec::Decomposed,
                    init,
                )),
                ReplayBuffer::new(cfg.train.replay_capacity),
            ),
            Algorithm::RssWoa => Policy::Rss(
                Box::new(RssLearner::new(
                    cfg.network.clone(),
                    cfg.train.clone(),
                    spaces,
                    ActionCodec::Flat,
                    init,
                )),
                ReplayBuffer::new(cfg.train.replay_capacity),
            ),
            Algorithm::Drqn => Policy::Drqn(
                Box::new(DrqnLearner::new(
                    cfg.network.clone(),
                    cfg.train.clone(),
                    cfg.drqn.clone(),
                    spaces,
                    init,
                )?),
                ReplayBuffer::new(cfg.train.replay_capacity),
            ),
            Algorithm::Random => Policy::Random(spaces),
        })
    }

    fn begin_episode(&mut self) {
        match self {
            Policy::Rss(l, _) => l.begin_episode(),
            Policy::Drqn(l, _) => l.begin_episode(),
            Policy::Random(_) => {}
        }
    }

    fn act_train(&mut self, obs: &Observation, rng: &mut ChaCha12Rng, episode: u32) -> (ValidAction, Pending) {
        match self {
            Policy::Rss(l, _) => {
                let (valid, prim, _) = l.act(obs, rng, false);
                (valid, Pending { prim: prim.0, index: 0 })
            }
            Policy::Drqn(l, _) => {
                let annealing = episode > l.tcfg.start_episode;
                let (valid, index) = l.act(obs, rng, annealing);
                (valid, Pending { prim: Vec::new(), index })
            }
            Policy::Random(spaces) => (random_act(spaces, rng), Pending { prim: Vec::new(), index: 0 }),
        }
    }

    fn record(&mut self, obs: &Observation, pending: Pending, reward: i64, next_obs: &Observation) {
        match self {
            Policy::Rss(_, replay) => replay
                .push_step(ExperienceTuple {
                    obs: obs.clone(),
                    action: pending.prim,
                    reward,
                    next_obs: next_obs.clone(),
                })
                .expect("observation chain is produced in order"),
            Policy::Drqn(_, replay) => replay
                .push_step(ExperienceTuple {
                    obs: obs.clone(),
                    action: pending.index,
                    reward,
                    next_obs: next_obs.clone(),
                })
                .expect("observation chain is produced in order"),
            Policy::Random(_) => {}
        }
    }

    fn end_episode(&mut self) {
        match self {
            Policy::Rss(_, replay) => replay.end_episode().expect("episode has steps"),
            Policy::Drqn(_, replay) => replay.end_episode().expect("episode has steps"),
            Policy::Random(_) => {}
        }
    }

    fn train_step(&mut self, rng: &mut ChaCha12Rng, episode: u32) -> Option<TrainLosses> {
        match self {
            Policy::Rss(l, replay) => l.train_step(replay, rng, episode).expect("replay holds enough episodes"),
            Policy::Drqn(l, replay) => l.train_step(replay, rng, episode).expect("replay holds enough episodes"),
            Policy::Random(_) => None,
        }
    }

    fn begin_eval_episode(&mut self) {
        match self {
            Policy::Rss(l, _) => l.begin_eval_episode(),
            Policy::Drqn(l, _) => l.begin_eval_episode(),
            Policy::Random(_) => {}
        }
    }

    fn act_eval(&mut self, obs: &Observation, rng: &mut ChaCha12Rng, deterministic: bool) -> ValidAction {
        match self {
            Policy::Rss(l, _) => l.act_eval(obs, rng, deterministic).0,
            Policy::Drqn(l, _) => l.act_eval(obs, rng, deterministic).0,
            Policy::Random(spaces) => random_act(spaces, rng),
        }
    }

    fn save(&self, path: &Path, meta: &[(String, String)]) -> Result<bool, HarnessError> {
        match self {
            Policy::Rss(l, _) => {
                l.save_checkpoint(path, meta)?;
                Ok(true)
            }
            Policy::Drqn(l, _) => {
                l.save_checkpoint(path, meta)?;
                Ok(true)
            }
            Policy::Random(_) => Ok(false),
        }
    }

    fn load(&mut self, path: &Path) -> Result<(), HarnessError> {
        match self {
            Policy::Rss(l, _) => l.load_checkpoint(path)?,
            Policy::Drqn(l, _) => l.load_checkpoint(path)?,
            Policy::Random(_) => {}
        }
        Ok(())
    }
}

/// One evaluation episode with frozen parameters. Returns the mean per-slot
/// reward and the per-set mean MRE.
fn eval_episode(
    policy: &mut Policy,
    cfg: &ExperimentConfig,
    seed: u64,
    episode: u32,
    slots: u32,
) -> Result<(f64, Vec<f64>), HarnessError> {
    let mut env = Env::new(cfg.network.clone(), episode_seed(seed, stream::EVAL_ENV, episode as u64))?;
    let mut rng = ChaCha12Rng::seed_from_u64(episode_seed(seed, stream::EVAL_POLICY, episode as u64));
    policy.begin_eval_episode();
    let mut obs = env.reset();
    let mut reward_sum = 0.0;
    let mut mre_sum = vec![0.0; cfg.network.k];
    for _ in 0..slots {
        let action = policy.act_eval(&obs, &mut rng, cfg.deterministic_eval);
        let out = env.step(&action)?;
        reward_sum += out.reward as f64;
        for (acc, &m) in mre_sum.iter_mut().zip(out.mre.iter()) {
            *acc += m as f64;
        }
        obs = out.next_obs;
    }
    let inv = 1.0 / slots as f64;
    Ok((reward_sum * inv, mre_sum.into_iter().map(|m| m * inv).collect()))
}

/// Runs every seed of the experiment sequentially. Each seed writes
/// `<algorithm>_seed<seed>.csv` (and a checkpoint for learning algorithms)
/// under the output directory.
pub fn run_training(cfg: &ExperimentConfig) -> Result<Vec<RunArtifacts>, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    cfg.seeds.iter().map(|&seed| run_one_seed(cfg, seed)).collect()
}

fn run_one_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RunArtifacts, HarnessError> {
    let mut policy = Policy::build(cfg, seed)?;
    let mut env = Env::new(cfg.network.clone(), sub_seed(seed, stream::TRAIN_ENV))?;
    let mut policy_rng = ChaCha12Rng::seed_from_u64(sub_seed(seed, stream::TRAIN_POLICY));
    let mut replay_rng = ChaCha12Rng::seed_from_u64(sub_seed(seed, stream::REPLAY));

    let metrics_path = cfg.output_dir.join(format!("{}_seed{}.csv", cfg.algorithm.tag(), seed));
    let mut metrics = std::io::BufWriter::new(std::fs::File::create(&metrics_path)?);
    writeln!(metrics, "{}", metrics_header(cfg.network.k))?;

    let slots = cfg.train.slots_per_episode;
    let mut last50: VecDeque<f64> = VecDeque::with_capacity(50);
    for episode in 1..=cfg.train.episodes {
        policy.begin_episode();
        let mut obs = env.reset();
        let mut loss_sums = (0.0, 0.0, 0.0);
        let mut loss_count = 0u32;
        for t in 1..=slots {
            let (action, pending) = policy.act_train(&obs, &mut policy_rng, episode);
            let out = env.step(&action)?;
            policy.record(&obs, pending, out.reward, &out.next_obs);
            obs = out.next_obs;
            if t % cfg.train.train_every == 0 {
                if let Some(losses) = policy.train_step(&mut replay_rng, episode) {
                    loss_sums.0 += losses.critic1;
                    loss_sums.1 += losses.critic2;
                    loss_sums.2 += losses.actor;
                    loss_count += 1;
                }
            }
        }
        policy.end_episode();

        if episode % cfg.eval_every == 0 {
            let (avg_reward, mre) = eval_episode(&mut policy, cfg, seed, episode, slots)?;
            if last50.len() == 50 {
                last50.pop_front();
            }
            last50.push_back(avg_reward);
            let scale = if loss_count > 0 { 1.0 / loss_count as f64 } else { f64::NAN };
            let row = MetricsRow {
                seed,
                episode,
                eval_avg_reward: avg_reward,
                critic1_loss: loss_sums.0 * scale,
                critic2_loss: loss_sums.1 * scale,
                actor_loss: loss_sums.2 * scale,
                mre,
            };
            writeln!(metrics, "{}", row.to_csv())?;
            metrics.flush()?;
        }
    }
    metrics.flush()?;

    let ckpt_path = cfg.output_dir.join(format!("{}_seed{}.ckpt", cfg.algorithm.tag(), seed));
    let meta = checkpoint_meta(cfg, seed);
    let wrote = policy.save(&ckpt_path, &meta)?;

    let last50_mean = if last50.is_empty() {
        f64::NAN
    } else {
        last50.iter().sum::<f64>() / last50.len() as f64
    };
    Ok(RunArtifacts {
        seed,
        metrics_path,
        checkpoint_path: wrote.then_some(ckpt_path),
        last50_mean,
    })
}

fn checkpoint_meta(cfg: &ExperimentConfig, seed: u64) -> Vec<(String, String)> {
    vec![
        ("format".into(), format!("aoci-core {}", env!("CARGO_PKG_VERSION"))),
        ("algorithm".into(), cfg.algorithm.tag().into()),
        ("seed".into(), seed.to_string()),
        ("k".into(), cfg.network.k.to_string()),
        ("n".into(), cfg.network.n().to_string()),
        ("hidden_width".into(), cfg.train.hidden_width.to_string()),
    ]
}

/// Evaluates a trained policy (or the random baseline, which needs no
/// checkpoint) over the requested number of evaluation episodes.
pub fn run_evaluation(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    episodes: u32,
    seed: u64,
) -> Result<EvalSummary, HarnessError> {
    if episodes == 0 {
        return Err(HarnessError::Invalid("evaluation needs at least one episode".into()));
    }
    cfg.validate()?;
    let mut policy = Policy::build(cfg, seed)?;
    match (&policy, checkpoint) {
        (Policy::Random(_), _) => {}
        (_, Some(path)) => policy.load(path)?,
        (_, None) => {
            return Err(HarnessError::Invalid(format!(
                "algorithm {} needs a checkpoint to evaluate",
                cfg.algorithm.tag()
            )))
        }
    }
    let slots = cfg.train.slots_per_episode;
    let mut per_episode = Vec::with_capacity(episodes as usize);
    let mut mre_mean = vec![0.0; cfg.network.k];
    for ep in 1..=episodes {
        let (avg, mre) = eval_episode(&mut policy, cfg, seed, ep, slots)?;
        per_episode.push(avg);
        for (acc, m) in mre_mean.iter_mut().zip(mre) {
            *acc += m / episodes as f64;
        }
    }
    let mean = per_episode.iter().sum::<f64>() / episodes as f64;
    let var = per_episode.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / episodes as f64;
    Ok(EvalSummary { episodes, mean, sd: var.sqrt(), mre_mean, per_episode })
}
