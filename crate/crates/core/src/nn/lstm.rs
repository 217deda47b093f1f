//! LSTM layer with standard sigmoid/tanh gating and exact backprop through
//! time.
//!
//! Gate weights are packed as one [4H x (I+H)] matrix over the concatenated
//! (input, previous hidden) vector, with row blocks in the order input gate,
//! forget gate, cell candidate, output gate. Biases follow the same layout.

use rand::Rng;

use crate::mat::{linear_forward, linear_grad_acc, linear_input_grad_acc, Mat};

use super::optim::he_init;

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    /// [4H x (I+H)], row blocks i|f|g|o.
    pub w: Mat,
    /// [4H]
    pub b: Vec<f64>,
    pub input_dim: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub dw: Mat,
    pub db: Vec<f64>,
}

/// Everything one step retains for exact backprop.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    /// Concatenated (input, h_prev), [B x (I+H)].
    pub xh: Mat,
    /// Activated gates, [B x 4H] in i|f|g|o order.
    pub gates: Mat,
    /// New cell state, [B x H].
    pub c: Mat,
    /// tanh of the new cell state, [B x H].
    pub tanh_c: Mat,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Lstm {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Lstm { w: he_init(input_dim + hidden, 4 * hidden, rng), b: vec![0.0; 4 * hidden], input_dim, hidden }
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Lstm {
            w: Mat::zeros(4 * hidden, input_dim + hidden),
            b: vec![0.0; 4 * hidden],
            input_dim,
            hidden,
        }
    }

    /// One step over a batch. Returns the new hidden state and the cache
    /// (which holds the new cell state).
    pub fn step(&self, x: &Mat, h_prev: &Mat, c_prev: &Mat) -> (Mat, LstmStepCache) {
        let bsz = x.rows;
        assert_eq!(x.cols, self.input_dim);
        assert_eq!(h_prev.cols, self.hidden);
        assert_eq!(h_prev.rows, bsz);
        let h = self.hidden;

        let mut xh = Mat::zeros(bsz, self.input_dim + h);
        for r in 0..bsz {
            let row = xh.row_mut(r);
            row[..self.input_dim].copy_from_slice(x.row(r));
            row[self.input_dim..].copy_from_slice(h_prev.row(r));
        }

        let mut gates = Mat::zeros(bsz, 4 * h);
        linear_forward(&xh, &self.w, &self.b, &mut gates);
        for r in 0..bsz {
            let row = gates.row_mut(r);
            for j in 0..h {
                row[j] = sigmoid(row[j]); // input gate
                row[h + j] = sigmoid(row[h + j]); // forget gate
                row[2 * h + j] = row[2 * h + j].tanh(); // cell candidate
                row[3 * h + j] = sigmoid(row[3 * h + j]); // output gate
            }
        }

        let mut c = Mat::zeros(bsz, h);
        let mut tanh_c = Mat::zeros(bsz, h);
        let mut h_new = Mat::zeros(bsz, h);
        for r in 0..bsz {
            let g = gates.row(r);
            let cp = c_prev.row(r);
            for j in 0..h {
                let cj = g[h + j] * cp[j] + g[j] * g[2 * h + j];
                let tc = cj.tanh();
                c.set(r, j, cj);
                tanh_c.set(r, j, tc);
                h_new.set(r, j, g[3 * h + j] * tc);
            }
        }

        (h_new, LstmStepCache { xh, gates, c, tanh_c })
    }

    /// Reverse-mode step. `dh` is the gradient w.r.t. this step's hidden
    /// output (recurrent carry already added by the caller); `dc_carry` holds
    /// the incoming cell-state gradient and is overwritten with the gradient
    /// w.r.t. the previous cell state. Gradients w.r.t. the input and the
    /// previous hidden state are accumulated into `dx` and `dh_prev`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward_step(
        &self,
        cache: &LstmStepCache,
        c_prev: &Mat,
        dh: &Mat,
        dc_carry: &mut Mat,
        grads: &mut LstmGrads,
        dx: &mut Mat,
        dh_prev: &mut Mat,
    ) {
        self.backward_step_impl(cache, c_prev, dh, dc_carry, grads, dx, dh_prev, true);
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward_step_impl(
        &self,
        cache: &LstmStepCache,
        c_prev: &Mat,
        dh: &Mat,
        dc_carry: &mut Mat,
        grads: &mut LstmGrads,
        dx: &mut Mat,
        dh_prev: &mut Mat,
        want_params: bool,
    ) {
        let bsz = dh.rows;
        let h = self.hidden;
        let mut dpre = Mat::zeros(bsz, 4 * h);
        for r in 0..bsz {
            let g = cache.gates.row(r);
            let tc = cache.tanh_c.row(r);
            let cp = c_prev.row(r);
            let dhr = dh.row(r);
            let dcr = dc_carry.row_mut(r);
            let dp = dpre.row_mut(r);
            for j in 0..h {
                let (ig, fg, cand, og) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let d_out = dhr[j] * tc[j];
                let dc = dcr[j] + dhr[j] * og * (1.0 - tc[j] * tc[j]);
                let d_in = dc * cand;
                let d_forget = dc * cp[j];
                let d_cand = dc * ig;
                dp[j] = d_in * ig * (1.0 - ig);
                dp[h + j] = d_forget * fg * (1.0 - fg);
                dp[2 * h + j] = d_cand * (1.0 - cand * cand);
                dp[3 * h + j] = d_out * og * (1.0 - og);
                dcr[j] = dc * fg;
            }
        }
        if want_params {
            linear_grad_acc(&dpre, &cache.xh, &mut grads.dw, &mut grads.db);
        }
        let mut dxh = Mat::zeros(bsz, self.input_dim + h);
        linear_input_grad_acc(&dpre, &self.w, &mut dxh);
        for r in 0..bsz {
            let row = dxh.row(r);
            for (j, v) in row[..self.input_dim].iter().enumerate() {
                dx.data[r * dx.cols + j] += v;
            }
            for (j, v) in row[self.input_dim..].iter().enumerate() {
                dh_prev.data[r * h + j] += v;
            }
        }
    }
}

impl LstmGrads {
    pub fn zeros_like(layer: &Lstm) -> Self {
        LstmGrads { dw: Mat::zeros(layer.w.rows, layer.w.cols), db: vec![0.0; layer.b.len()] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// Straight-line single-sample reference, written independently of the
    /// batched path: plain per-gate loops with separate weight slices.
    fn reference_step(
        layer: &Lstm,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let h = layer.hidden;
        let mut xh: Vec<f64> = x.to_vec();
        xh.extend_from_slice(h_prev);
        let pre: Vec<f64> = (0..4 * h)
            .map(|row| {
                layer.b[row]
                    + layer
                        .w
                        .row(row)
                        .iter()
                        .zip(xh.iter())
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect();
        let mut h_new = vec![0.0; h];
        let mut c_new = vec![0.0; h];
        for j in 0..h {
            let i = 1.0 / (1.0 + (-pre[j]).exp());
            let f = 1.0 / (1.0 + (-pre[h + j]).exp());
            let g = pre[2 * h + j].tanh();
            let o = 1.0 / (1.0 + (-pre[3 * h + j]).exp());
            c_new[j] = f * c_prev[j] + i * g;
            h_new[j] = o * c_new[j].tanh();
        }
        (h_new, c_new)
    }

    #[test]
    fn zero_layer_stays_at_zero() {
        let layer = Lstm::zeros(3, 4);
        let x = Mat::from_rows(vec![vec![0.7, -0.2, 0.1]]);
        let h0 = Mat::zeros(1, 4);
        let c0 = Mat::zeros(1, 4);
        let (h, cache) = layer.step(&x, &h0, &c0);
        assert!(h.data.iter().all(|&v| v == 0.0));
        assert!(cache.c.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batched_step_matches_straight_line_reference() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let layer = Lstm::new(3, 4, &mut rng);
        let mut h = Mat::zeros(1, 4);
        let mut c = Mat::zeros(1, 4);
        let mut h_ref = vec![0.0; 4];
        let mut c_ref = vec![0.0; 4];
        use rand::Rng;
        for _ in 0..5 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let (h_new, cache) = layer.step(&Mat::from_rows(vec![x.clone()]), &h, &c);
            let (hr, cr) = reference_step(&layer, &x, &h_ref, &c_ref);
            for j in 0..4 {
                assert!((h_new.get(0, j) - hr[j]).abs() < 1e-12);
                assert!((cache.c.get(0, j) - cr[j]).abs() < 1e-12);
            }
            h = h_new;
            c = cache.c.clone();
            h_ref = hr;
            c_ref = cr;
        }
    }
}
