//! Command-line front end: subspace enumeration, training, evaluation,
//! random-policy rollouts, gradient checking, and the exact soft-value
//! oracle.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use aoci_core::actspace::build_action_spaces;
use aoci_core::harness::{
    load_config, oracle_soft_values, run_evaluation, run_training, two_point_policy, Algorithm,
    ExperimentConfig,
};
use aoci_core::nn::{grad_check, grad_check_seq_len, RecurrentNet};

#[derive(Parser)]
#[command(name = "aoci", about = "Status-update scheduling for energy-harvesting sensors", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Replace the config's seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of slots per episode.
    #[arg(long)]
    slots: Option<u32>,
    /// Override the training cadence (one step per this many slots).
    #[arg(long)]
    train_every: Option<u32>,
    /// Evaluate with the policy mean instead of sampling.
    #[arg(long)]
    deterministic_eval: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the per-CSP subspace tables and the valid-action count.
    Enumerate { config: PathBuf },
    /// Train per the config, one metrics file and checkpoint per seed.
    Train {
        config: PathBuf,
        /// Override the number of training episodes.
        #[arg(long)]
        episodes: Option<u32>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a checkpoint over fresh evaluation episodes.
    Eval {
        config: PathBuf,
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 50)]
        episodes: u32,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Roll out the random policy and summarize rewards.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value_t = 50)]
        episodes: u32,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Verify analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Check the soft-value recursions against the series definitions on a
    /// tiny instance.
    Oracle {
        config: PathBuf,
        /// Probability of scheduling the first qualified subsets.
        #[arg(long, default_value_t = 0.5)]
        schedule_prob: f64,
        /// Entropy temperature.
        #[arg(long, default_value_t = 0.02)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
}

fn apply_overrides(cfg: &mut ExperimentConfig, o: &Overrides) {
    if let Some(seed) = o.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(slots) = o.slots {
        cfg.train.slots_per_episode = slots;
    }
    if let Some(every) = o.train_every {
        cfg.train.train_every = every;
    }
    cfg.deterministic_eval = o.deterministic_eval;
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Enumerate { config } => {
            let cfg = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
            let spaces = build_action_spaces(&cfg.network)?;
            for sub in &spaces.subspaces {
                println!(
                    "CSP {} (sensors {:?}): {} elements",
                    sub.csp_index + 1,
                    cfg.network.sensor_sets[sub.csp_index],
                    sub.size()
                );
                for (i, element) in sub.elements.iter().enumerate() {
                    let members: Vec<String> = element
                        .iter()
                        .enumerate()
                        .filter(|(_, &on)| on)
                        .map(|(local, _)| (cfg.network.sensor_sets[sub.csp_index][local] + 1).to_string())
                        .collect();
                    let set = if members.is_empty() { "{}".to_string() } else { format!("{{{}}}", members.join(",")) };
                    println!("  [{i}] {set}");
                }
            }
            println!("total valid actions: {}", spaces.total_valid);
        }
        Command::Train { config, episodes, overrides } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, &overrides);
            if let Some(episodes) = episodes {
                cfg.train.episodes = episodes;
            }
            let arts = run_training(&cfg)?;
            for a in &arts {
                println!(
                    "seed {}: last-50 eval mean {:.3}, metrics {}{}",
                    a.seed,
                    a.last50_mean,
                    a.metrics_path.display(),
                    a.checkpoint_path
                        .as_ref()
                        .map(|p| format!(", checkpoint {}", p.display()))
                        .unwrap_or_default()
                );
            }
        }
        Command::Eval { config, checkpoint, episodes, overrides } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, &overrides);
            let seed = overrides.seed.unwrap_or_else(|| cfg.seeds[0]);
            let summary = run_evaluation(&cfg, Some(&checkpoint), episodes, seed)?;
            println!(
                "{} episodes: mean reward {:.4}, sd {:.4}, per-set mean MRE {:?}",
                summary.episodes, summary.mean, summary.sd, summary.mre_mean
            );
        }
        Command::Simulate { config, episodes, overrides } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, &overrides);
            cfg.algorithm = Algorithm::Random;
            let seed = overrides.seed.unwrap_or_else(|| cfg.seeds[0]);
            let summary = run_evaluation(&cfg, None, episodes, seed)?;
            println!(
                "random policy, {} episodes: mean reward {:.4}, sd {:.4}, per-set mean MRE {:?}",
                summary.episodes, summary.mean, summary.sd, summary.mre_mean
            );
        }
        Command::Gradcheck { tolerance } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(20_240_817);
            let mut failed = false;
            // Small stand-ins for the actor (obs -> 2K) and critic
            // (obs+action -> 1) stacks, plus a length-50 unroll.
            for (label, net, len) in [
                ("actor-shaped 7 -> 6 -> 6", RecurrentNet::new(7, 6, 6, &mut rng), 5),
                ("critic-shaped 10 -> 6 -> 1", RecurrentNet::new(10, 6, 1, &mut rng), 5),
                ("length-50 unroll 4 -> 4 -> 2", RecurrentNet::new(4, 4, 2, &mut rng), 50),
            ] {
                let report = grad_check_seq_len(&net, tolerance, len, &mut rng);
                println!("{label}:\n{report}");
                failed |= !report.pass;
            }
            let zero = RecurrentNet::zeros(5, 4, 3);
            let report = grad_check(&zero, tolerance, &mut rng);
            println!("zero network:\n{report}");
            failed |= !report.pass;
            if failed {
                bail!("gradient check failed");
            }
        }
        Command::Oracle { config, schedule_prob, alpha, tolerance } => {
            let cfg = load_config(&config)?;
            let policy = two_point_policy(&cfg.network, schedule_prob)?;
            let gamma = cfg.network.discount;
            let report = oracle_soft_values(&cfg.network, &policy, gamma, alpha, tolerance)?;
            println!("{report}");
            if !report.pass {
                bail!("oracle discrepancy above tolerance");
            }
        }
    }
    Ok(())
}
