//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `--nocapture` to see them live).
//!
//! Criteria 6 and 7 share one pair of desk-scale learning runs (the reduced
//! preset: 200 episodes of 300 slots, training every fourth slot from
//! episode 21). The full-scale protocol lives in
//! `criterion6_full_scale_six_seeds`, which is `#[ignore]`d by default;
//! run it explicitly with `cargo test --release -- --ignored`.

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use aoci_core::actspace::{
    build_action_spaces, enumerate_subspace, map_to_valid, validate_action, ProtoAction,
    ValidAction,
};
use aoci_core::agent::{
    normalize_obs, obs_dim, random_act, sample_primitive, ActionCodec, RssLearner, SeqBatch,
    SquashCfg, TrainConfig,
};
use aoci_core::env::{
    default_config, reset, transition, EnvState, NetworkConfig, ObsBattery,
};
use aoci_core::harness::{
    default_experiment, oracle_soft_values, run_evaluation, run_training, tiny_oracle_config,
    two_point_policy, Algorithm, ExperimentConfig,
};
use aoci_core::mat::Mat;
use aoci_core::nn::{
    grad_check_seq_len, Activation, Dense, DenseGrads, RecurrentNet, BLOCK_COUNT,
    BLOCK_NAMES,
};
use aoci_core::replay::{ExperienceTuple, ReplayBuffer};

fn report(criterion: &str, pass: bool, details: &str) {
    println!("criterion {criterion}: {} — {details}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {details}");
}

// ---------------------------------------------------------------------------
// Criterion 1: valid-action counts.
// ---------------------------------------------------------------------------

#[test]
fn criterion1_valid_action_counts() {
    let start = Instant::now();
    let mut counts = Vec::new();
    for (k, expected) in [(3usize, 344u64), (5, 16_808), (7, 823_544)] {
        let spaces = build_action_spaces(&default_config(k)).unwrap();
        counts.push(spaces.total_valid);
        assert_eq!(spaces.total_valid, expected, "K = {k}");
    }
    // Full materialization at K = 3: all 8^3 proto-actions map onto exactly
    // 344 distinct valid actions.
    let cfg = default_config(3);
    let spaces = build_action_spaces(&cfg).unwrap();
    let mut distinct = std::collections::HashSet::new();
    for a in 0..8usize {
        for b in 0..8 {
            for c in 0..8 {
                distinct.insert(map_to_valid(&ProtoAction(vec![a, b, c]), &spaces).mask);
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = counts == [344, 16_808, 823_544] && distinct.len() == 344 && elapsed.as_secs_f64() < 1.0;
    report(
        "1 (valid-action counts)",
        pass,
        &format!("counts {counts:?}, materialized {} distinct, {:.3}s", distinct.len(), elapsed.as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: subspace oracle.
// ---------------------------------------------------------------------------

#[test]
fn criterion2_subspace_oracle() {
    let start = Instant::now();
    let importances = [0.4, 0.6, 0.8, 1.0];
    let sub = enumerate_subspace(0, &importances, 2, 1.0).unwrap();

    // Independent brute force over all 2^4 subsets.
    let mut brute: Vec<Vec<bool>> = Vec::new();
    for bits in 1u32..16 {
        if bits.count_ones() > 2 {
            continue;
        }
        let sum: f64 = (0..4).filter(|&i| bits >> i & 1 == 1).map(|i| importances[i]).sum();
        if sum >= 1.0 {
            brute.push((0..4).map(|i| bits >> i & 1 == 1).collect());
        }
    }
    let ours: std::collections::HashSet<_> = sub.elements[1..].iter().cloned().collect();
    let brute_set: std::collections::HashSet<_> = brute.into_iter().collect();

    // The canonical listing: {4}, {1,2}, {1,3}, {1,4}, {2,3}, {2,4}, {3,4}.
    let listed = [
        vec![false, false, false, true],
        vec![true, true, false, false],
        vec![true, false, true, false],
        vec![true, false, false, true],
        vec![false, true, true, false],
        vec![false, true, false, true],
        vec![false, false, true, true],
    ];
    let elapsed = start.elapsed();
    let pass = sub.size() == 8 && ours == brute_set && sub.elements[1..] == listed && elapsed.as_secs_f64() < 1.0;
    report(
        "2 (subspace oracle)",
        pass,
        &format!("size {}, brute-force match {}, {:.3}s", sub.size(), ours == brute_set, elapsed.as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: environment property suite.
// ---------------------------------------------------------------------------

fn random_property_config(rng: &mut ChaCha12Rng) -> NetworkConfig {
    let k = rng.gen_range(1..=3);
    let mut sensor_sets = Vec::new();
    let mut importance = Vec::new();
    let mut threshold = Vec::new();
    let mut next = 0usize;
    let mut min_set = usize::MAX;
    for _ in 0..k {
        let len = rng.gen_range(1..=4usize);
        min_set = min_set.min(len);
        sensor_sets.push((next..next + len).collect::<Vec<_>>());
        next += len;
        for _ in 0..len {
            importance.push((rng.gen_range(2..=15) as f64) / 10.0);
        }
    }
    let m = rng.gen_range(1..=min_set);
    for set in &sensor_sets {
        // Threshold at most the best attainable sum, so a qualified subset
        // always exists.
        let mut ds: Vec<f64> = set.iter().map(|&s| importance[s]).collect();
        ds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let best: f64 = ds.iter().take(m).sum();
        threshold.push(best * rng.gen_range(0.3..=1.0));
    }
    let n = next;
    NetworkConfig {
        k,
        sensor_sets,
        m,
        failure_prob: (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect(),
        eh_prob: (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect(),
        battery_cap: (0..n).map(|_| rng.gen_range(1..=5)).collect(),
        importance,
        threshold,
        g_max: rng.gen_range(3..=20),
        x_max: rng.gen_range(3..=20),
        aoci_max: rng.gen_range(3..=20),
        discount: 0.99,
    }
}

/// Reference recomputation of G and X from the full scheduled/delivered
/// history (saturating at the caps).
fn reference_g_x(scheduled: &[bool], delivered: &[bool], g_max: u32, x_max: u32) -> (u32, u32) {
    let t = scheduled.len(); // slots simulated so far
    let last_delivery = (0..t).rev().find(|&l| delivered[l]);
    let since = match last_delivery {
        Some(l) => t - 1 - l,
        None => t,
    };
    let g = (since as u32).min(g_max);
    let from = last_delivery.map(|l| l + 1).unwrap_or(0);
    let x_true: u32 = scheduled[from..].iter().map(|&s| s as u32).sum();
    (g, x_true.min(x_max))
}

#[test]
fn criterion3_environment_property_suite() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0xE17);
    let mut steps_done = 0u64;
    let target = 100_000u64;
    let mut violations = 0u64;
    while steps_done < target {
        let cfg = random_property_config(&mut rng);
        cfg.validate().expect("generated configs are valid");
        let spaces = build_action_spaces(&cfg).unwrap();
        let n = cfg.n();
        let (mut state, _) = reset(&cfg).unwrap();
        let mut cum_activations = vec![0u64; n];
        let mut cum_arrivals = vec![0u64; n];
        let mut scheduled_hist: Vec<Vec<bool>> = vec![Vec::new(); n];
        let mut delivered_hist: Vec<Vec<bool>> = vec![Vec::new(); n];
        for _ in 0..500 {
            let action = if rng.gen_bool(0.2) {
                ValidAction::zero(n)
            } else {
                random_act(&spaces, &mut rng)
            };
            let success: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let eh: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let prev = state.clone();
            let (next, out) = transition(&prev, &action, &success, &eh, &cfg).unwrap();

            for s in 0..n {
                cum_activations[s] += out.activated[s] as u64;
                cum_arrivals[s] += eh[s] as u64;
                scheduled_hist[s].push(action.mask[s]);
                delivered_hist[s].push(out.delivered[s]);

                // Energy causality and battery bounds.
                if cum_activations[s] > cfg.battery_cap[s] as u64 + cum_arrivals[s] {
                    violations += 1;
                }
                if next.battery[s] > cfg.battery_cap[s] {
                    violations += 1;
                }
                // Delivery implies activation; the sentinel appears exactly
                // when the sensor did not deliver, otherwise the pre-arrival
                // residual is reported.
                if out.delivered[s] && !out.activated[s] {
                    violations += 1;
                }
                let expected_obs = if out.delivered[s] {
                    ObsBattery::Reported(prev.battery[s] - 1)
                } else {
                    ObsBattery::Sentinel
                };
                if out.next_obs.battery[s] != expected_obs {
                    violations += 1;
                }
                // Bookkeeping against the independent history recomputation.
                let (g_ref, x_ref) =
                    reference_g_x(&scheduled_hist[s], &delivered_hist[s], cfg.g_max, cfg.x_max);
                if next.g[s] != g_ref || next.x[s] != x_ref {
                    violations += 1;
                }
            }
            // AoCI law and reward.
            let expected_aoci =
                if out.integrated { 1 } else { (prev.aoci + 1).min(cfg.aoci_max) };
            if next.aoci != expected_aoci || out.reward != -(next.aoci as i64) {
                violations += 1;
            }
            // Integration is the conjunction of per-set conditions, and the
            // per-set conditions match a direct recomputation.
            for (kk, set) in cfg.sensor_sets.iter().enumerate() {
                let f: f64 = set
                    .iter()
                    .filter(|&&s| out.delivered[s])
                    .map(|&s| cfg.importance[s])
                    .sum();
                if out.csp_met[kk] != (f >= cfg.threshold[kk]) {
                    violations += 1;
                }
                let mre = set.iter().map(|&s| next.battery[s]).min().unwrap();
                if out.mre[kk] != mre {
                    violations += 1;
                }
            }
            if out.integrated != out.csp_met.iter().all(|&m| m) {
                violations += 1;
            }
            state = next;
            steps_done += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = violations == 0 && elapsed.as_secs_f64() < 30.0;
    report(
        "3 (environment properties)",
        pass,
        &format!("{steps_done} randomized steps, {violations} violations, {:.2}s", elapsed.as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: gradient exactness.
// ---------------------------------------------------------------------------

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Finite-difference check of a standalone rectifier dense layer.
fn dense_layer_fd(rng: &mut ChaCha12Rng) -> f64 {
    let mut layer = Dense::new(5, 4, Activation::Rectifier, rng);
    let x = Mat::from_rows(vec![(0..5).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()]);
    let w: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() - 0.5).collect();
    let loss = |l: &Dense| -> f64 {
        l.forward(&x).row(0).iter().zip(&w).map(|(y, c)| y * c).sum()
    };
    let y = layer.forward(&x);
    let dy = Mat::from_rows(vec![w.clone()]);
    let mut grads = DenseGrads::zeros_like(&layer);
    let mut dx = Mat::zeros(1, 5);
    layer.backward(&x, &y, &dy, &mut grads, &mut dx);

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..layer.w.data.len() {
        let orig = layer.w.data[i];
        layer.w.data[i] = orig + h;
        let plus = loss(&layer);
        layer.w.data[i] = orig - h;
        let minus = loss(&layer);
        layer.w.data[i] = orig;
        worst = worst.max(rel_err(grads.dw.data[i], (plus - minus) / (2.0 * h)));
    }
    for i in 0..layer.b.len() {
        let orig = layer.b[i];
        layer.b[i] = orig + h;
        let plus = loss(&layer);
        layer.b[i] = orig - h;
        let minus = loss(&layer);
        layer.b[i] = orig;
        worst = worst.max(rel_err(grads.db[i], (plus - minus) / (2.0 * h)));
    }
    worst
}

/// Finite-difference check of the log-probability of a reparameterized
/// sample w.r.t. the policy head outputs, with the noise held fixed.
fn log_prob_path_fd(rng: &mut ChaCha12Rng) -> f64 {
    let cfg = SquashCfg::default();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let mu = rng.gen_range(-2.0..2.0);
        let ls = rng.gen_range(-2.0..1.0);
        let eps = rng.gen_range(-2.0..2.0);
        let size = *[2.0, 8.0, 344.0].iter().nth(rng.gen_range(0..3)).unwrap();
        let s = sample_primitive(&[mu], &[ls], &[eps], &[size], &cfg);
        let t = s.tanh_u[0];
        // Analytic partials used by the actor update.
        let d_mu = 2.0 * t;
        let d_ls = -1.0 + 2.0 * t * s.sigma[0] * eps;
        let num_mu = (sample_primitive(&[mu + h], &[ls], &[eps], &[size], &cfg).log_prob
            - sample_primitive(&[mu - h], &[ls], &[eps], &[size], &cfg).log_prob)
            / (2.0 * h);
        let num_ls = (sample_primitive(&[mu], &[ls + h], &[eps], &[size], &cfg).log_prob
            - sample_primitive(&[mu], &[ls - h], &[eps], &[size], &cfg).log_prob)
            / (2.0 * h);
        worst = worst.max(rel_err(d_mu, num_mu)).max(rel_err(d_ls, num_ls));
    }
    worst
}

fn tiny_learner_with_batch(seed: u64) -> (RssLearner, SeqBatch, Vec<Mat>) {
    let ncfg = default_config(1);
    let mut tcfg = TrainConfig::table_defaults(ncfg.discount);
    tcfg.hidden_width = 5;
    tcfg.batch_episodes = 2;
    tcfg.seq_len = 4;
    tcfg.start_episode = 2;
    let spaces = build_action_spaces(&ncfg).unwrap();
    let mut learner = RssLearner::new(ncfg.clone(), tcfg, spaces, ActionCodec::Decomposed, seed);

    let mut replay = ReplayBuffer::new(8);
    let mut env = aoci_core::env::Env::new(ncfg.clone(), seed ^ 0x5eed).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xacc);
    for _ in 0..3 {
        let mut obs = env.reset();
        learner.begin_episode();
        for _ in 0..6 {
            let (valid, prim, _) = learner.act(&obs, &mut rng, false);
            let out = env.step(&valid).unwrap();
            replay
                .push_step(ExperienceTuple {
                    obs: obs.clone(),
                    action: prim.0.clone(),
                    reward: out.reward,
                    next_obs: out.next_obs.clone(),
                })
                .unwrap();
            obs = out.next_obs;
        }
        replay.end_episode().unwrap();
    }
    let runs = replay.sample_sequences(2, 4, &mut rng).unwrap();
    let batch = SeqBatch::assemble(&runs, &ncfg);
    let noises: Vec<Mat> = (0..batch.len())
        .map(|_| {
            let mut m = Mat::zeros(batch.lanes, 1);
            for v in m.data.iter_mut() {
                *v = rng.gen_range(-1.5..1.5);
            }
            m
        })
        .collect();
    (learner, batch, noises)
}

/// Finite differences of the critic loss w.r.t. critic-1 parameters.
fn critic_loss_fd(learner: &mut RssLearner, batch: &SeqBatch, noises: &[Mat]) -> f64 {
    let ((_, grads), _) = learner.critic_gradients(batch, noises);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for b in 0..BLOCK_COUNT {
        for i in 0..learner.critic1.block(b).len() {
            let orig = learner.critic1.block(b)[i];
            learner.critic1.block_mut(b)[i] = orig + h;
            let plus = learner.critic_losses(batch, noises).0;
            learner.critic1.block_mut(b)[i] = orig - h;
            let minus = learner.critic_losses(batch, noises).0;
            learner.critic1.block_mut(b)[i] = orig;
            worst = worst.max(rel_err(grads.block(b)[i], (plus - minus) / (2.0 * h)));
        }
    }
    worst
}

/// Finite differences of the actor objective w.r.t. actor parameters, with
/// critics frozen and noise fixed.
fn actor_loss_fd(learner: &mut RssLearner, batch: &SeqBatch, noises: &[Mat]) -> f64 {
    let (_, grads) = learner.actor_gradients(batch, noises);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for b in 0..BLOCK_COUNT {
        for i in 0..learner.actor.block(b).len() {
            let orig = learner.actor.block(b)[i];
            learner.actor.block_mut(b)[i] = orig + h;
            let plus = learner.actor_loss(batch, noises);
            learner.actor.block_mut(b)[i] = orig - h;
            let minus = learner.actor_loss(batch, noises);
            learner.actor.block_mut(b)[i] = orig;
            worst = worst.max(rel_err(grads.block(b)[i], (plus - minus) / (2.0 * h)));
        }
    }
    worst
}

#[test]
fn criterion4_gradient_exactness() {
    let start = Instant::now();
    let tol = 1e-4;
    let mut rng = ChaCha12Rng::seed_from_u64(0x6AD);

    let dense_err = dense_layer_fd(&mut rng);

    // Full stack including the LSTM over a length-50 sequence.
    let net = RecurrentNet::new(4, 4, 2, &mut rng);
    let lstm50 = grad_check_seq_len(&net, tol, 50, &mut rng);

    let logp_err = log_prob_path_fd(&mut rng);

    let (mut learner, batch, noises) = tiny_learner_with_batch(0xbeef);
    let critic_err = critic_loss_fd(&mut learner, &batch, &noises);
    let actor_err = actor_loss_fd(&mut learner, &batch, &noises);

    let elapsed = start.elapsed();
    let worst = dense_err.max(lstm50.max_rel_err).max(logp_err).max(critic_err).max(actor_err);
    let pass = worst <= tol && elapsed.as_secs_f64() < 120.0;
    report(
        "4 (gradient exactness)",
        pass,
        &format!(
            "dense {dense_err:.2e}, lstm-50 {:.2e}, log-prob {logp_err:.2e}, critic loss {critic_err:.2e}, actor loss {actor_err:.2e}, {:.1}s",
            lstm50.max_rel_err,
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: soft-value oracle.
// ---------------------------------------------------------------------------

#[test]
fn criterion5_soft_value_oracle() {
    let start = Instant::now();
    let cfg = tiny_oracle_config();
    let policy = two_point_policy(&cfg, 0.5).unwrap();
    let base = oracle_soft_values(&cfg, &policy, 0.9, 0.02, 1e-6).unwrap();
    let no_entropy = oracle_soft_values(&cfg, &policy, 0.9, 0.0, 1e-6).unwrap();
    let myopic = oracle_soft_values(&cfg, &policy, 0.0, 0.02, 1e-6).unwrap();
    let elapsed = start.elapsed();
    let pass = base.pass && no_entropy.pass && myopic.pass && elapsed.as_secs_f64() < 60.0;
    report(
        "5 (soft-value oracle)",
        pass,
        &format!(
            "gaps {:.2e} / {:.2e} / {:.2e} over {} states, {:.2}s",
            base.discrepancy(),
            no_entropy.discrepancy(),
            myopic.discrepancy(),
            base.states,
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criteria 6 and 7: learning efficacy at the desk-scale gate.
// ---------------------------------------------------------------------------

const GATE_SEED: u64 = 1;

struct HeavyResults {
    rss_last50: f64,
    drqn_last50: f64,
    random_reduced_last50: f64,
    random_full_mean: f64,
    rss_minutes: f64,
    drqn_minutes: f64,
}

fn reduced_experiment(algorithm: Algorithm, dir: &str) -> ExperimentConfig {
    let mut cfg = default_experiment(3, algorithm);
    cfg.train = TrainConfig::reduced_preset(cfg.network.discount);
    cfg.seeds = vec![GATE_SEED];
    cfg.output_dir = std::env::temp_dir().join("aoci_acceptance").join(dir);
    cfg
}

fn heavy() -> &'static HeavyResults {
    static HEAVY: OnceLock<HeavyResults> = OnceLock::new();
    HEAVY.get_or_init(|| {
        let (rss, rest) = std::thread::scope(|scope| {
            let rss_handle = scope.spawn(|| {
                let t = Instant::now();
                let arts = run_training(&reduced_experiment(Algorithm::Rss, "rss")).unwrap();
                (arts[0].last50_mean, t.elapsed().as_secs_f64() / 60.0)
            });
            let t = Instant::now();
            let drqn_arts = run_training(&reduced_experiment(Algorithm::Drqn, "drqn")).unwrap();
            let drqn_minutes = t.elapsed().as_secs_f64() / 60.0;
            let random_arts = run_training(&reduced_experiment(Algorithm::Random, "random")).unwrap();
            // Paper-scale random band check: 50 evaluation episodes of 1000
            // slots on the unreduced default scenario.
            let full = default_experiment(3, Algorithm::Random);
            let full_summary = run_evaluation(&full, None, 50, GATE_SEED).unwrap();
            (
                rss_handle.join().expect("gate training thread panicked"),
                (drqn_arts[0].last50_mean, drqn_minutes, random_arts[0].last50_mean, full_summary.mean),
            )
        });
        HeavyResults {
            rss_last50: rss.0,
            rss_minutes: rss.1,
            drqn_last50: rest.0,
            drqn_minutes: rest.1,
            random_reduced_last50: rest.2,
            random_full_mean: rest.3,
        }
    })
}

#[test]
fn criterion6_learning_efficacy_reduced_gate() {
    let h = heavy();
    // Paper-scale random mean must land in the stated band; the desk-scale
    // gate then demands a 3x advantage for the trained learner.
    let band_ok = h.random_full_mean >= -55.0 && h.random_full_mean <= -33.0;
    let ratio = h.random_reduced_last50 / h.rss_last50;
    let pass = band_ok && ratio >= 3.0;
    report(
        "6 (learning efficacy, reduced gate)",
        pass,
        &format!(
            "RSS last-50 {:.2} vs random {:.2} (ratio {:.2}x, needs >= 3), full-scale random {:.2} in [-55, -33]: {}, RSS run {:.0} min",
            h.rss_last50, h.random_reduced_last50, ratio, h.random_full_mean, band_ok, h.rss_minutes
        ),
    );
}

#[test]
fn criterion7_drqn_sanity_ordering() {
    let h = heavy();
    let pass = h.random_reduced_last50 < h.drqn_last50 && h.drqn_last50 < h.rss_last50;
    report(
        "7 (baseline ordering)",
        pass,
        &format!(
            "random {:.2} < drqn {:.2} < rss {:.2} at matched budgets, DRQN run {:.0} min",
            h.random_reduced_last50, h.drqn_last50, h.rss_last50, h.drqn_minutes
        ),
    );
}

/// The paper-scale protocol: six seeds, 500 episodes of 1000 slots, training
/// every slot. Hours-scale; run explicitly with `--ignored`.
#[test]
#[ignore]
fn criterion6_full_scale_six_seeds() {
    let mut cfg = default_experiment(3, Algorithm::Rss);
    cfg.output_dir = std::env::temp_dir().join("aoci_acceptance").join("full_rss");
    let arts = run_training(&cfg).unwrap();
    let rss_mean = arts.iter().map(|a| a.last50_mean).sum::<f64>() / arts.len() as f64;

    let full_random = default_experiment(3, Algorithm::Random);
    let random = run_evaluation(&full_random, None, 50, GATE_SEED).unwrap().mean;

    let band_ok = (-55.0..=-33.0).contains(&random);
    let pass = rss_mean >= -8.0 && band_ok && random / rss_mean >= 4.0;
    report(
        "6-full (paper scale, six seeds)",
        pass,
        &format!("RSS mean {rss_mean:.2} (needs >= -8), random {random:.2} (band ok: {band_ok}, needs 4x)"),
    );
}

/// Baseline ordering at the paper-scale budget (one seed, per-slot
/// training): random < DRQN < RSS. Hours-scale; run explicitly with
/// `--ignored`.
#[test]
#[ignore]
fn criterion7_full_scale_ordering() {
    let base = std::env::temp_dir().join("aoci_acceptance");
    let mut rss_cfg = default_experiment(3, Algorithm::Rss);
    rss_cfg.seeds = vec![GATE_SEED];
    rss_cfg.output_dir = base.join("full7_rss");
    let mut drqn_cfg = default_experiment(3, Algorithm::Drqn);
    drqn_cfg.seeds = vec![GATE_SEED];
    drqn_cfg.output_dir = base.join("full7_drqn");
    let mut random_cfg = default_experiment(3, Algorithm::Random);
    random_cfg.seeds = vec![GATE_SEED];
    random_cfg.output_dir = base.join("full7_random");

    let (rss, (drqn, random)) = std::thread::scope(|scope| {
        let h = scope.spawn(|| run_training(&rss_cfg).unwrap()[0].last50_mean);
        let drqn = run_training(&drqn_cfg).unwrap()[0].last50_mean;
        let random = run_training(&random_cfg).unwrap()[0].last50_mean;
        (h.join().expect("training thread panicked"), (drqn, random))
    });
    let pass = random < drqn && drqn < rss;
    report(
        "7-full (paper scale ordering)",
        pass,
        &format!("random {random:.2} < drqn {drqn:.2} < rss {rss:.2}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: determinism.
// ---------------------------------------------------------------------------

#[test]
fn criterion8_metrics_determinism() {
    let mut cfg = default_experiment(3, Algorithm::Rss);
    cfg.train.episodes = 4;
    cfg.train.slots_per_episode = 60;
    cfg.train.start_episode = 2;
    cfg.train.batch_episodes = 2;
    cfg.train.seq_len = 20;
    cfg.train.hidden_width = 16;
    cfg.seeds = vec![7];
    cfg.output_dir = std::env::temp_dir().join("aoci_acceptance").join("det_a");
    let a = run_training(&cfg).unwrap();
    let mut cfg_b = cfg.clone();
    cfg_b.output_dir = std::env::temp_dir().join("aoci_acceptance").join("det_b");
    let b = run_training(&cfg_b).unwrap();
    let bytes_a = std::fs::read(&a[0].metrics_path).unwrap();
    let bytes_b = std::fs::read(&b[0].metrics_path).unwrap();
    // Checkpoints replay bitwise too.
    let ckpt_a = std::fs::read(a[0].checkpoint_path.as_ref().unwrap()).unwrap();
    let ckpt_b = std::fs::read(b[0].checkpoint_path.as_ref().unwrap()).unwrap();
    let pass = bytes_a == bytes_b && ckpt_a == ckpt_b;
    report(
        "8 (determinism)",
        pass,
        &format!("metrics {} bytes identical, checkpoints {} bytes identical", bytes_a.len(), ckpt_a.len()),
    );
}

// ---------------------------------------------------------------------------
// Cross-cutting invariants that belong with the acceptance run.
// ---------------------------------------------------------------------------

/// Every policy's emitted action validates, and evaluation leaves parameters
/// untouched.
#[test]
fn policies_emit_valid_actions_and_eval_is_pure() {
    let ncfg = default_config(2);
    let spaces = build_action_spaces(&ncfg).unwrap();
    let mut tcfg = TrainConfig::table_defaults(ncfg.discount);
    tcfg.hidden_width = 8;
    let mut learner =
        RssLearner::new(ncfg.clone(), tcfg, spaces.clone(), ActionCodec::Decomposed, 3);
    let (_, obs) = reset(&ncfg).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    learner.begin_eval_episode();
    let before: Vec<Vec<f64>> = (0..BLOCK_COUNT).map(|i| learner.actor.block(i).to_vec()).collect();
    for _ in 0..50 {
        let (a, _, logp) = learner.act_eval(&obs, &mut rng, false);
        assert!(validate_action(&a, &ncfg));
        assert!(logp.is_finite());
        let r = random_act(&spaces, &mut rng);
        assert!(validate_action(&r, &ncfg));
    }
    for i in 0..BLOCK_COUNT {
        assert_eq!(learner.actor.block(i), &before[i][..], "eval must not touch {}", BLOCK_NAMES[i]);
    }
}

/// The normalized observation layout matches the declared 3N+1 shape on a
/// fresh reset.
#[test]
fn observation_normalization_shape() {
    let ncfg = default_config(3);
    let (_, obs) = reset(&ncfg).unwrap();
    let v = normalize_obs(&obs, &ncfg);
    assert_eq!(v.len(), obs_dim(&ncfg));
}

/// Saturated states stay inside bounds under long all-out schedules.
#[test]
fn long_horizon_saturation_stays_bounded() {
    let ncfg = default_config(1);
    let spaces = build_action_spaces(&ncfg).unwrap();
    let mut env = aoci_core::env::Env::new(ncfg.clone(), 5).unwrap();
    env.reset();
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let mut state: EnvState;
    for _ in 0..2000 {
        let a = random_act(&spaces, &mut rng);
        env.step(&a).unwrap();
        state = env.state.clone();
        assert!(state.aoci <= ncfg.aoci_max);
        for s in 0..ncfg.n() {
            assert!(state.g[s] <= ncfg.g_max);
            assert!(state.x[s] <= ncfg.x_max);
            assert!(state.battery[s] <= ncfg.battery_cap[s]);
        }
    }
}
