//! The three-layer recurrent stack used by every learner: a rectifier dense
//! layer expanding the input, an LSTM layer, and a linear output head.

use rand::Rng;

use crate::mat::Mat;

use super::dense::{Activation, Dense, DenseGrads};
use super::lstm::{Lstm, LstmGrads, LstmStepCache};

pub const BLOCK_COUNT: usize = 6;
pub const BLOCK_NAMES: [&str; BLOCK_COUNT] =
    ["fc_in.w", "fc_in.b", "lstm.w", "lstm.b", "fc_out.w", "fc_out.b"];

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentNet {
    pub fc_in: Dense,
    pub lstm: Lstm,
    pub fc_out: Dense,
}

/// Hidden and cell state, one row per batch lane. Zero at sequence start.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState {
    pub h: Mat,
    pub c: Mat,
}

impl NetState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        NetState { h: Mat::zeros(batch, hidden), c: Mat::zeros(batch, hidden) }
    }
}

#[derive(Debug, Clone)]
pub struct NetGrads {
    pub fc_in: DenseGrads,
    pub lstm: LstmGrads,
    pub fc_out: DenseGrads,
}

/// Per-step retained values for a whole forward pass.
pub struct SeqCache {
    pub inputs: Vec<Mat>,
    pub fc1_out: Vec<Mat>,
    pub lstm_steps: Vec<LstmStepCache>,
    pub hs: Vec<Mat>,
    pub state0: NetState,
}

impl RecurrentNet {
    pub fn new(input_dim: usize, width: usize, output_dim: usize, rng: &mut impl Rng) -> Self {
        RecurrentNet {
            fc_in: Dense::new(input_dim, width, Activation::Rectifier, rng),
            lstm: Lstm::new(width, width, rng),
            fc_out: Dense::new(width, output_dim, Activation::Identity, rng),
        }
    }

    pub fn zeros(input_dim: usize, width: usize, output_dim: usize) -> Self {
        RecurrentNet {
            fc_in: Dense::zeros(input_dim, width, Activation::Rectifier),
            lstm: Lstm::zeros(width, width),
            fc_out: Dense::zeros(width, output_dim, Activation::Identity),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.fc_in.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.fc_out.output_dim()
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden
    }

    pub fn param_count(&self) -> usize {
        (0..BLOCK_COUNT).map(|i| self.block(i).len()).sum()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.fc_in.w.data,
            1 => &self.fc_in.b,
            2 => &self.lstm.w.data,
            3 => &self.lstm.b,
            4 => &self.fc_out.w.data,
            5 => &self.fc_out.b,
            _ => panic!("no block {i}"),
        }
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        match i {
            0 => &mut self.fc_in.w.data,
            1 => &mut self.fc_in.b,
            2 => &mut self.lstm.w.data,
            3 => &mut self.lstm.b,
            4 => &mut self.fc_out.w.data,
            5 => &mut self.fc_out.b,
            _ => panic!("no block {i}"),
        }
    }

    /// Single acting step: updates `state` in place, no cache.
    pub fn forward_step(&self, x: &Mat, state: &mut NetState) -> Mat {
        let y1 = self.fc_in.forward(x);
        let (h, cache) = self.lstm.step(&y1, &state.h, &state.c);
        let out = self.fc_out.forward(&h);
        state.h = h;
        state.c = cache.c;
        out
    }

    /// Unrolls the stack over a sequence, retaining everything backward
    /// needs. All lanes share the time axis; recurrent state starts from
    /// `state0`.
    pub fn forward_seq(&self, inputs: Vec<Mat>, state0: &NetState) -> (Vec<Mat>, SeqCache, NetState) {
        let steps = inputs.len();
        let mut fc1_out = Vec::with_capacity(steps);
        let mut lstm_steps = Vec::with_capacity(steps);
        let mut hs = Vec::with_capacity(steps);
        let mut outputs = Vec::with_capacity(steps);
        let mut h = state0.h.clone();
        let mut c = state0.c.clone();
        for x in &inputs {
            assert_eq!(x.cols, self.input_dim(), "input width mismatch");
            let y1 = self.fc_in.forward(x);
            let (h_new, step_cache) = self.lstm.step(&y1, &h, &c);
            let out = self.fc_out.forward(&h_new);
            h = h_new.clone();
            c = step_cache.c.clone();
            fc1_out.push(y1);
            lstm_steps.push(step_cache);
            hs.push(h_new);
            outputs.push(out);
        }
        let final_state = NetState { h, c };
        (outputs, SeqCache { inputs, fc1_out, lstm_steps, hs, state0: state0.clone() }, final_state)
    }

    /// Exact reverse-mode gradients of the scalar loss implied by
    /// `output_grads`. Returns parameter gradients and per-step input
    /// gradients. No gradient flows across the sequence boundary.
    pub fn backward_seq(&self, cache: &SeqCache, output_grads: &[Mat]) -> (NetGrads, Vec<Mat>) {
        self.backward_seq_impl(cache, output_grads, true)
    }

    /// Input gradients only; parameter gradients are skipped. Used where a
    /// frozen network sits inside another network's loss.
    pub fn backward_seq_inputs(&self, cache: &SeqCache, output_grads: &[Mat]) -> Vec<Mat> {
        self.backward_seq_impl(cache, output_grads, false).1
    }

    fn backward_seq_impl(
        &self,
        cache: &SeqCache,
        output_grads: &[Mat],
        want_params: bool,
    ) -> (NetGrads, Vec<Mat>) {
        let steps = cache.inputs.len();
        assert_eq!(output_grads.len(), steps, "cache/grad mismatch");
        let batch = if steps == 0 { 0 } else { cache.inputs[0].rows };
        let hidden = self.hidden();
        let mut grads = NetGrads::zeros_like(self);
        let mut input_grads: Vec<Mat> =
            cache.inputs.iter().map(|x| Mat::zeros(x.rows, x.cols)).collect();

        let mut dh_carry = Mat::zeros(batch, hidden);
        let mut dc_carry = Mat::zeros(batch, hidden);
        for t in (0..steps).rev() {
            assert_eq!(output_grads[t].rows, batch, "cache/grad mismatch");
            assert_eq!(output_grads[t].cols, self.output_dim(), "cache/grad mismatch");
            let mut dh = dh_carry;
            self.fc_out.backward_impl(
                &cache.hs[t],
                &cache.hs[t],
                &output_grads[t],
                &mut grads.fc_out,
                &mut dh,
                want_params,
            );
            let c_prev = if t == 0 { &cache.state0.c } else { &cache.lstm_steps[t - 1].c };
            let mut dy1 = Mat::zeros(batch, self.lstm.input_dim);
            let mut dh_prev = Mat::zeros(batch, hidden);
            self.lstm.backward_step_impl(
                &cache.lstm_steps[t],
                c_prev,
                &dh,
                &mut dc_carry,
                &mut grads.lstm,
                &mut dy1,
                &mut dh_prev,
                want_params,
            );
            self.fc_in.backward_impl(
                &cache.inputs[t],
                &cache.fc1_out[t],
                &dy1,
                &mut grads.fc_in,
                &mut input_grads[t],
                want_params,
            );
            dh_carry = dh_prev;
        }
        (grads, input_grads)
    }
}

impl NetGrads {
    pub fn zeros_like(net: &RecurrentNet) -> Self {
        NetGrads {
            fc_in: DenseGrads::zeros_like(&net.fc_in),
            lstm: LstmGrads::zeros_like(&net.lstm),
            fc_out: DenseGrads::zeros_like(&net.fc_out),
        }
    }

    pub fn block(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.fc_in.dw.data,
            1 => &self.fc_in.db,
            2 => &self.lstm.dw.data,
            3 => &self.lstm.db,
            4 => &self.fc_out.dw.data,
            5 => &self.fc_out.db,
            _ => panic!("no block {i}"),
        }
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        match i {
            0 => &mut self.fc_in.dw.data,
            1 => &mut self.fc_in.db,
            2 => &mut self.lstm.dw.data,
            3 => &mut self.lstm.db,
            4 => &mut self.fc_out.dw.data,
            5 => &mut self.fc_out.db,
            _ => panic!("no block {i}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_inputs(rng: &mut ChaCha12Rng, steps: usize, batch: usize, dim: usize) -> Vec<Mat> {
        use rand::Rng;
        (0..steps)
            .map(|_| {
                Mat::from_rows(
                    (0..batch).map(|_| (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = RecurrentNet::zeros(3, 4, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let inputs = random_inputs(&mut rng, 6, 2, 3);
        let (outs, _, final_state) = net.forward_seq(inputs, &NetState::zeros(2, 4));
        assert!(outs.iter().all(|m| m.data.iter().all(|&v| v == 0.0)));
        assert!(final_state.h.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_one_sequence_equals_single_step() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let net = RecurrentNet::new(3, 4, 2, &mut rng);
        let inputs = random_inputs(&mut rng, 1, 1, 3);
        let (outs, _, seq_state) = net.forward_seq(inputs.clone(), &NetState::zeros(1, 4));
        let mut state = NetState::zeros(1, 4);
        let out = net.forward_step(&inputs[0], &mut state);
        assert_eq!(outs[0], out);
        assert_eq!(seq_state, state);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng_a = ChaCha12Rng::seed_from_u64(2);
        let mut rng_b = ChaCha12Rng::seed_from_u64(2);
        let net_a = RecurrentNet::new(5, 6, 3, &mut rng_a);
        let net_b = RecurrentNet::new(5, 6, 3, &mut rng_b);
        assert_eq!(net_a, net_b);
        let inputs = random_inputs(&mut rng_a, 4, 2, 5);
        let (outs_a, _, _) = net_a.forward_seq(inputs.clone(), &NetState::zeros(2, 6));
        let (outs_b, _, _) = net_b.forward_seq(inputs, &NetState::zeros(2, 6));
        assert_eq!(outs_a, outs_b);
    }

    #[test]
    fn state_carryover_is_real() {
        // Evaluating [a; b] from zero state must differ from evaluating b
        // alone from zero state; otherwise the recurrence is broken.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let net = RecurrentNet::new(3, 8, 2, &mut rng);
        let a = random_inputs(&mut rng, 4, 1, 3);
        let b = random_inputs(&mut rng, 4, 1, 3);
        let mut ab = a.clone();
        ab.extend(b.iter().cloned());
        let (outs_ab, _, _) = net.forward_seq(ab, &NetState::zeros(1, 8));
        let (outs_b, _, _) = net.forward_seq(b, &NetState::zeros(1, 8));
        let diff: f64 = outs_ab[4..]
            .iter()
            .zip(outs_b.iter())
            .map(|(x, y)| x.data.iter().zip(y.data.iter()).map(|(u, v)| (u - v).abs()).sum::<f64>())
            .sum();
        assert!(diff > 1e-6, "state carryover must change outputs, diff = {diff}");
    }

    /// Straight-line reimplementation of the whole stack for one sample,
    /// written without the batched kernels: plain nested loops per layer.
    fn reference_stack_step(
        net: &RecurrentNet,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let matvec = |w: &Mat, b: &[f64], v: &[f64]| -> Vec<f64> {
            (0..w.rows)
                .map(|o| b[o] + w.row(o).iter().zip(v).map(|(a, x)| a * x).sum::<f64>())
                .collect()
        };
        let mut y1 = matvec(&net.fc_in.w, &net.fc_in.b, x);
        for v in y1.iter_mut() {
            *v = v.max(0.0);
        }
        let hid = net.hidden();
        let mut xh = y1.clone();
        xh.extend_from_slice(h_prev);
        let pre = matvec(&net.lstm.w, &net.lstm.b, &xh);
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let mut h = vec![0.0; hid];
        let mut c = vec![0.0; hid];
        for j in 0..hid {
            let i = sig(pre[j]);
            let f = sig(pre[hid + j]);
            let g = pre[2 * hid + j].tanh();
            let o = sig(pre[3 * hid + j]);
            c[j] = f * c_prev[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        let out = matvec(&net.fc_out.w, &net.fc_out.b, &h);
        (out, h, c)
    }

    #[test]
    fn random_stack_matches_straight_line_reference() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let net = RecurrentNet::new(3, 4, 2, &mut rng);
        let inputs = random_inputs(&mut rng, 5, 1, 3);
        let (outs, _, _) = net.forward_seq(inputs.clone(), &NetState::zeros(1, 4));
        let mut h = vec![0.0; 4];
        let mut c = vec![0.0; 4];
        for (x, out) in inputs.iter().zip(outs.iter()) {
            let (out_ref, h_new, c_new) = reference_stack_step(&net, x.row(0), &h, &c);
            for j in 0..2 {
                assert!((out.get(0, j) - out_ref[j]).abs() < 1e-12);
            }
            h = h_new;
            c = c_new;
        }
    }

    #[test]
    fn zero_output_grads_give_zero_param_grads() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let net = RecurrentNet::new(3, 4, 2, &mut rng);
        let inputs = random_inputs(&mut rng, 5, 2, 3);
        let (outs, cache, _) = net.forward_seq(inputs, &NetState::zeros(2, 4));
        let zero_grads: Vec<Mat> = outs.iter().map(|o| Mat::zeros(o.rows, o.cols)).collect();
        let (grads, input_grads) = net.backward_seq(&cache, &zero_grads);
        for i in 0..BLOCK_COUNT {
            assert!(grads.block(i).iter().all(|&v| v == 0.0));
        }
        assert!(input_grads.iter().all(|m| m.data.iter().all(|&v| v == 0.0)));
    }
}
