//! Recurrent soft actor-critic learner.
//!
//! One recurrent actor (outputs mean and log scale per primitive component),
//! two recurrent critics with slow-moving target copies. Critics minimize the
//! squared soft Bellman residual against shared entropy-regularized bootstrap
//! targets; the actor minimizes temperature-weighted log probability minus
//! the pessimistic critic value, with gradients flowing through the
//! reparameterized sample. With the `Flat` codec the same machinery runs
//! without action decomposition on a single index scaled to (0, |A|).

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::path::Path;

use crate::actspace::{ActionSpaces, PrimitiveAction, ValidAction};
use crate::env::{NetworkConfig, Observation};
use crate::mat::Mat;
use crate::nn::{
    ema_blend_net, read_checkpoint, write_checkpoint, Checkpoint, CheckpointError, NetGrads,
    NetState, RecurrentNet, RmsProp, BLOCK_COUNT, BLOCK_NAMES,
};
use crate::replay::{EpisodeRun, ReplayBuffer, ReplayError};

use super::{
    normalize_obs, obs_dim, sample_primitive, soft_target, ActionCodec, SquashSample, TrainConfig,
    TrainLosses,
};

const NET_NAMES: [&str; 5] = ["actor", "critic1", "critic2", "target1", "target2"];

/// A sampled mini-batch laid out for lockstep sequence processing: step l
/// holds one row per sequence lane.
pub struct SeqBatch {
    pub obs: Vec<Mat>,
    pub next_obs: Vec<Mat>,
    /// Stored primitive actions, raw scale.
    pub actions: Vec<Mat>,
    pub rewards: Vec<Vec<f64>>,
    pub lanes: usize,
}

impl SeqBatch {
    pub fn assemble(runs: &[EpisodeRun<'_, Vec<f64>>], ncfg: &NetworkConfig) -> SeqBatch {
        let lanes = runs.len();
        let len = runs[0].len();
        let k = runs[0].actions[0].len();
        let d = obs_dim(ncfg);
        let mut obs = Vec::with_capacity(len);
        let mut next_obs = Vec::with_capacity(len);
        let mut actions = Vec::with_capacity(len);
        let mut rewards = Vec::with_capacity(len);
        for l in 0..len {
            let mut o = Mat::zeros(lanes, d);
            let mut no = Mat::zeros(lanes, d);
            let mut a = Mat::zeros(lanes, k);
            let mut r = vec![0.0; lanes];
            for (b, run) in runs.iter().enumerate() {
                o.row_mut(b).copy_from_slice(&normalize_obs(&run.obs[l], ncfg));
                no.row_mut(b).copy_from_slice(&normalize_obs(&run.obs[l + 1], ncfg));
                a.row_mut(b).copy_from_slice(&run.actions[l]);
                r[b] = run.rewards[l] as f64;
            }
            obs.push(o);
            next_obs.push(no);
            actions.push(a);
            rewards.push(r);
        }
        SeqBatch { obs, next_obs, actions, rewards, lanes }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

#[derive(Debug)]
pub struct RssLearner {
    pub ncfg: NetworkConfig,
    pub tcfg: TrainConfig,
    pub spaces: ActionSpaces,
    pub codec: ActionCodec,
    pub sizes: Vec<f64>,
    pub actor: RecurrentNet,
    pub critic1: RecurrentNet,
    pub critic2: RecurrentNet,
    pub target1: RecurrentNet,
    pub target2: RecurrentNet,
    opt_actor: RmsProp,
    opt_critic1: RmsProp,
    opt_critic2: RmsProp,
    act_state: NetState,
    eval_state: NetState,
}

impl RssLearner {
    pub fn new(
        ncfg: NetworkConfig,
        tcfg: TrainConfig,
        spaces: ActionSpaces,
        codec: ActionCodec,
        init_seed: u64,
    ) -> Self {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(init_seed);
        let d = obs_dim(&ncfg);
        let k = codec.dims(&spaces);
        let w = tcfg.hidden_width;
        let actor = RecurrentNet::new(d, w, 2 * k, &mut rng);
        let critic1 = RecurrentNet::new(d + k, w, 1, &mut rng);
        let critic2 = RecurrentNet::new(d + k, w, 1, &mut rng);
        let target1 = critic1.clone();
        let target2 = critic2.clone();
        let opt_actor = RmsProp::new(&actor, tcfg.lr_actor, tcfg.rmsprop_decay, tcfg.rmsprop_eps);
        let opt_critic1 = RmsProp::new(&critic1, tcfg.lr_critic, tcfg.rmsprop_decay, tcfg.rmsprop_eps);
        let opt_critic2 = RmsProp::new(&critic2, tcfg.lr_critic, tcfg.rmsprop_decay, tcfg.rmsprop_eps);
        let sizes = codec.sizes(&spaces);
        RssLearner {
            ncfg,
            tcfg,
            spaces,
            codec,
            sizes,
            actor,
            critic1,
            critic2,
            target1,
            target2,
            opt_actor,
            opt_critic1,
            opt_critic2,
            act_state: NetState::zeros(1, w),
            eval_state: NetState::zeros(1, w),
        }
    }

    pub fn dims(&self) -> usize {
        self.codec.dims(&self.spaces)
    }

    pub fn begin_episode(&mut self) {
        self.act_state = NetState::zeros(1, self.tcfg.hidden_width);
    }

    pub fn begin_eval_episode(&mut self) {
        self.eval_state = NetState::zeros(1, self.tcfg.hidden_width);
    }

    /// One acting step for the behavior policy (training episodes).
    pub fn act(
        &mut self,
        obs: &Observation,
        rng: &mut ChaCha12Rng,
        deterministic: bool,
    ) -> (ValidAction, PrimitiveAction, f64) {
        let x = Mat::from_rows(vec![normalize_obs(obs, &self.ncfg)]);
        let out = self.actor.forward_step(&x, &mut self.act_state);
        Self::pick(&out, rng, deterministic, &self.sizes, &self.tcfg, &self.codec, &self.spaces)
    }

    /// One acting step with the evaluation-side recurrent state. Parameters
    /// are never touched.
    pub fn act_eval(
        &mut self,
        obs: &Observation,
        rng: &mut ChaCha12Rng,
        deterministic: bool,
    ) -> (ValidAction, PrimitiveAction, f64) {
        let x = Mat::from_rows(vec![normalize_obs(obs, &self.ncfg)]);
        let out = self.actor.forward_step(&x, &mut self.eval_state);
        Self::pick(&out, rng, deterministic, &self.sizes, &self.tcfg, &self.codec, &self.spaces)
    }

    fn pick(
        out: &Mat,
        rng: &mut ChaCha12Rng,
        deterministic: bool,
        sizes: &[f64],
        tcfg: &TrainConfig,
        codec: &ActionCodec,
        spaces: &ActionSpaces,
    ) -> (ValidAction, PrimitiveAction, f64) {
        let k = sizes.len();
        let row = out.row(0);
        let (mu, ls) = row.split_at(k);
        let noise: Vec<f64> = if deterministic {
            vec![0.0; k]
        } else {
            (0..k).map(|_| rng.sample(StandardNormal)).collect()
        };
        let s = sample_primitive(mu, ls, &noise, sizes, &tcfg.squash);
        let prim = PrimitiveAction(s.prim.clone());
        let valid = codec.to_valid(&prim, spaces);
        (valid, prim, s.log_prob)
    }

    /// Draws the batch and noise, then runs one critic update, one actor
    /// update, and the target blends. No-op until `episode` exceeds the
    /// configured start episode.
    pub fn train_step(
        &mut self,
        replay: &ReplayBuffer<Vec<f64>>,
        rng: &mut ChaCha12Rng,
        episode: u32,
    ) -> Result<Option<TrainLosses>, ReplayError> {
        if episode <= self.tcfg.start_episode {
            return Ok(None);
        }
        let runs = replay.sample_sequences(self.tcfg.batch_episodes, self.tcfg.seq_len, rng)?;
        let batch = SeqBatch::assemble(&runs, &self.ncfg);
        let noises_next = self.draw_noises(&batch, rng);
        let noises_fresh = self.draw_noises(&batch, rng);
        let (critic1, critic2) = self.critic_update(&batch, &noises_next);
        let actor = self.actor_update(&batch, &noises_fresh);
        ema_blend_net(&mut self.target1, &self.critic1, self.tcfg.tau);
        ema_blend_net(&mut self.target2, &self.critic2, self.tcfg.tau);
        Ok(Some(TrainLosses { critic1, critic2, actor }))
    }

    fn draw_noises(&self, batch: &SeqBatch, rng: &mut ChaCha12Rng) -> Vec<Mat> {
        let k = self.dims();
        (0..batch.len())
            .map(|_| {
                let mut m = Mat::zeros(batch.lanes, k);
                for v in m.data.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                m
            })
            .collect()
    }

    /// Actor samples over a whole (shifted) observation sequence, zero-state
    /// initialized. Returns per-step samples indexed [l][lane].
    fn sample_over_seq(&self, inputs: &[Mat], noises: &[Mat]) -> (Vec<Mat>, Vec<Vec<SquashSample>>) {
        let lanes = inputs[0].rows;
        let (outs, _, _) =
            self.actor.forward_seq(inputs.to_vec(), &NetState::zeros(lanes, self.tcfg.hidden_width));
        self.sample_outputs(&outs, noises)
    }

    fn sample_outputs(&self, outs: &[Mat], noises: &[Mat]) -> (Vec<Mat>, Vec<Vec<SquashSample>>) {
        let k = self.dims();
        let mut prims = Vec::with_capacity(outs.len());
        let mut samples = Vec::with_capacity(outs.len());
        for (out, noise) in outs.iter().zip(noises.iter()) {
            let mut prim = Mat::zeros(out.rows, k);
            let mut step = Vec::with_capacity(out.rows);
            for b in 0..out.rows {
                let row = out.row(b);
                let (mu, ls) = row.split_at(k);
                let s = sample_primitive(mu, ls, noise.row(b), &self.sizes, &self.tcfg.squash);
                prim.row_mut(b).copy_from_slice(&s.prim);
                step.push(s);
            }
            prims.push(prim);
            samples.push(step);
        }
        (prims, samples)
    }

    /// Critic input: normalized observation concatenated with the primitive
    /// action scaled into (0, 1).
    fn critic_inputs(&self, obs: &[Mat], prims: &[Mat]) -> Vec<Mat> {
        let k = self.dims();
        obs.iter()
            .zip(prims.iter())
            .map(|(o, p)| {
                let mut m = Mat::zeros(o.rows, o.cols + k);
                for b in 0..o.rows {
                    let row = m.row_mut(b);
                    row[..o.cols].copy_from_slice(o.row(b));
                    for i in 0..k {
                        row[o.cols + i] = p.get(b, i) / self.sizes[i];
                    }
                }
                m
            })
            .collect()
    }

    /// Entropy-regularized bootstrap targets, shared by both critics.
    pub fn compute_targets(&self, batch: &SeqBatch, noises_next: &[Mat]) -> Vec<Vec<f64>> {
        let lanes = batch.lanes;
        let (next_prims, next_samples) = self.sample_over_seq(&batch.next_obs, noises_next);
        let next_in = self.critic_inputs(&batch.next_obs, &next_prims);
        let state0 = NetState::zeros(lanes, self.tcfg.hidden_width);
        let (q1, q2) = std::thread::scope(|scope| {
            let h = scope.spawn(|| self.target1.forward_seq(next_in.clone(), &state0).0);
            let q2 = self.target2.forward_seq(next_in.clone(), &state0).0;
            (h.join().expect("target forward thread panicked"), q2)
        });
        let mut targets = Vec::with_capacity(batch.len());
        for l in 0..batch.len() {
            let mut row = vec![0.0; lanes];
            for b in 0..lanes {
                row[b] = soft_target(
                    batch.rewards[l][b],
                    self.tcfg.discount,
                    self.tcfg.alpha,
                    q1[l].get(b, 0),
                    q2[l].get(b, 0),
                    next_samples[l][b].log_prob,
                );
            }
            targets.push(row);
        }
        targets
    }

    fn critic_loss_grads(
        &self,
        net: &RecurrentNet,
        inputs: &[Mat],
        targets: &[Vec<f64>],
        lanes: usize,
    ) -> (f64, NetGrads) {
        let state0 = NetState::zeros(lanes, self.tcfg.hidden_width);
        let (q, cache, _) = net.forward_seq(inputs.to_vec(), &state0);
        let count = (inputs.len() * lanes) as f64;
        let mut loss = 0.0;
        let mut dq = Vec::with_capacity(inputs.len());
        for l in 0..inputs.len() {
            let mut g = Mat::zeros(lanes, 1);
            for b in 0..lanes {
                let resid = q[l].get(b, 0) - targets[l][b];
                loss += resid * resid;
                g.set(b, 0, 2.0 * resid / count);
            }
            dq.push(g);
        }
        let (grads, _) = net.backward_seq(&cache, &dq);
        (loss / count, grads)
    }

    /// Mean squared soft Bellman residual per critic, without stepping. For
    /// gradient verification against finite differences.
    pub fn critic_losses(&self, batch: &SeqBatch, noises_next: &[Mat]) -> (f64, f64) {
        let targets = self.compute_targets(batch, noises_next);
        let inputs = self.critic_inputs(&batch.obs, &batch.actions);
        let state0 = NetState::zeros(batch.lanes, self.tcfg.hidden_width);
        let count = (batch.len() * batch.lanes) as f64;
        let mut losses = [0.0, 0.0];
        for (j, net) in [&self.critic1, &self.critic2].into_iter().enumerate() {
            let (q, _, _) = net.forward_seq(inputs.clone(), &state0);
            for l in 0..batch.len() {
                for b in 0..batch.lanes {
                    let resid = q[l].get(b, 0) - targets[l][b];
                    losses[j] += resid * resid;
                }
            }
            losses[j] /= count;
        }
        (losses[0], losses[1])
    }

    /// Losses and gradients of both critics against shared targets, without
    /// stepping.
    pub fn critic_gradients(
        &self,
        batch: &SeqBatch,
        noises_next: &[Mat],
    ) -> ((f64, NetGrads), (f64, NetGrads)) {
        let targets = self.compute_targets(batch, noises_next);
        let inputs = self.critic_inputs(&batch.obs, &batch.actions);
        // The two critics are independent; compute their gradients in
        // parallel.
        std::thread::scope(|scope| {
            let h1 = scope
                .spawn(|| self.critic_loss_grads(&self.critic1, &inputs, &targets, batch.lanes));
            let r2 = self.critic_loss_grads(&self.critic2, &inputs, &targets, batch.lanes);
            (h1.join().expect("critic gradient thread panicked"), r2)
        })
    }

    /// Steps both critics on their squared residuals against shared targets.
    pub fn critic_update(&mut self, batch: &SeqBatch, noises_next: &[Mat]) -> (f64, f64) {
        let ((l1, g1), (l2, g2)) = self.critic_gradients(batch, noises_next);
        self.opt_critic1.step(&mut self.critic1, &g1);
        self.opt_critic2.step(&mut self.critic2, &g2);
        (l1, l2)
    }

    /// The actor objective on fresh reparameterized samples:
    /// mean(alpha * log pi - min_j Q_j).
    pub fn actor_loss(&self, batch: &SeqBatch, noises: &[Mat]) -> f64 {
        let (prims, samples) = self.sample_over_seq(&batch.obs, noises);
        let inputs = self.critic_inputs(&batch.obs, &prims);
        let state0 = NetState::zeros(batch.lanes, self.tcfg.hidden_width);
        let (q1, _, _) = self.critic1.forward_seq(inputs.clone(), &state0);
        let (q2, _, _) = self.critic2.forward_seq(inputs, &state0);
        let count = (batch.len() * batch.lanes) as f64;
        let mut loss = 0.0;
        for l in 0..batch.len() {
            for b in 0..batch.lanes {
                let qmin = q1[l].get(b, 0).min(q2[l].get(b, 0));
                loss += self.tcfg.alpha * samples[l][b].log_prob - qmin;
            }
        }
        loss / count
    }

    /// One RMSprop step on the actor with critics held fixed. Gradients flow
    /// through the sample path and the log-probability terms.
    pub fn actor_update(&mut self, batch: &SeqBatch, noises: &[Mat]) -> f64 {
        let (loss, grads) = self.actor_gradients(batch, noises);
        self.opt_actor.step(&mut self.actor, &grads);
        loss
    }

    /// Loss and gradient of the actor objective, without stepping.
    pub fn actor_gradients(&self, batch: &SeqBatch, noises: &[Mat]) -> (f64, NetGrads) {
        let k = self.dims();
        let d = obs_dim(&self.ncfg);
        let lanes = batch.lanes;
        let state0 = NetState::zeros(lanes, self.tcfg.hidden_width);
        let count = (batch.len() * lanes) as f64;

        let (a_outs, a_cache, _) = self.actor.forward_seq(batch.obs.clone(), &state0);
        let (prims, samples) = self.sample_outputs(&a_outs, noises);
        let inputs = self.critic_inputs(&batch.obs, &prims);
        let ((q1, c1_cache), (q2, c2_cache)) = std::thread::scope(|scope| {
            let h = scope.spawn(|| {
                let (q, cache, _) = self.critic1.forward_seq(inputs.clone(), &state0);
                (q, cache)
            });
            let (q2, c2_cache, _) = self.critic2.forward_seq(inputs.clone(), &state0);
            (h.join().expect("critic forward thread panicked"), (q2, c2_cache))
        });

        let mut loss = 0.0;
        let mut dq1 = Vec::with_capacity(batch.len());
        let mut dq2 = Vec::with_capacity(batch.len());
        for l in 0..batch.len() {
            let mut g1 = Mat::zeros(lanes, 1);
            let mut g2 = Mat::zeros(lanes, 1);
            for b in 0..lanes {
                let (v1, v2) = (q1[l].get(b, 0), q2[l].get(b, 0));
                loss += self.tcfg.alpha * samples[l][b].log_prob - v1.min(v2);
                if v1 <= v2 {
                    g1.set(b, 0, -1.0 / count);
                } else {
                    g2.set(b, 0, -1.0 / count);
                }
            }
            dq1.push(g1);
            dq2.push(g2);
        }
        loss /= count;

        // Gradient of -Qmin w.r.t. the primitive action, through the critic
        // inputs (which carry the action scaled by 1/size). The critics are
        // frozen here, so parameter gradients are skipped.
        let (in1, in2) = std::thread::scope(|scope| {
            let h = scope.spawn(|| self.critic1.backward_seq_inputs(&c1_cache, &dq1));
            let r2 = self.critic2.backward_seq_inputs(&c2_cache, &dq2);
            (h.join().expect("critic backward thread panicked"), r2)
        });

        let alpha_term = self.tcfg.alpha / count;
        let mut dout = Vec::with_capacity(batch.len());
        for l in 0..batch.len() {
            let mut g = Mat::zeros(lanes, 2 * k);
            for b in 0..lanes {
                let s = &samples[l][b];
                let noise = noises[l].row(b);
                for i in 0..k {
                    let da = (in1[l].get(b, d + i) + in2[l].get(b, d + i)) / self.sizes[i];
                    let t = s.tanh_u[i];
                    let corr = 1.0 - t * t;
                    let dprim_du = self.sizes[i] / 2.0 * corr;
                    let dlogp_du = if s.corr_grad[i] { 2.0 * t } else { 0.0 };
                    let du_dls = if s.scale_grad[i] { s.sigma[i] * noise[i] } else { 0.0 };
                    let scale_mask = if s.scale_grad[i] { 1.0 } else { 0.0 };
                    let gmu = alpha_term * dlogp_du + da * dprim_du;
                    let gls = alpha_term * (-scale_mask + dlogp_du * du_dls) + da * dprim_du * du_dls;
                    g.set(b, i, gmu);
                    g.set(b, k + i, gls);
                }
            }
            dout.push(g);
        }

        let (agrads, _) = self.actor.backward_seq(&a_cache, &dout);
        (loss, agrads)
    }

    fn nets(&self) -> [&RecurrentNet; 5] {
        [&self.actor, &self.critic1, &self.critic2, &self.target1, &self.target2]
    }

    pub fn save_checkpoint(&self, path: &Path, meta: &[(String, String)]) -> Result<(), CheckpointError> {
        let mut blocks = Vec::new();
        for (net, name) in self.nets().into_iter().zip(NET_NAMES) {
            for i in 0..BLOCK_COUNT {
                blocks.push((format!("{name}.{}", BLOCK_NAMES[i]), net.block(i)));
            }
        }
        write_checkpoint(path, meta, &blocks)
    }

    pub fn load_checkpoint(&mut self, path: &Path) -> Result<(), CheckpointError> {
        let ckpt = read_checkpoint(path)?;
        self.restore(&ckpt)
    }

    pub fn restore(&mut self, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
        let nets: [&mut RecurrentNet; 5] =
            [&mut self.actor, &mut self.critic1, &mut self.critic2, &mut self.target1, &mut self.target2];
        for (net, name) in nets.into_iter().zip(NET_NAMES) {
            for i in 0..BLOCK_COUNT {
                let key = format!("{name}.{}", BLOCK_NAMES[i]);
                let data = ckpt.take_block(&key, net.block(i).len())?;
                net.block_mut(i).copy_from_slice(data);
            }
        }
        Ok(())
    }
}
