//! Finite-difference verification of the analytic gradients.
//!
//! The check runs a randomized linear loss over a sequence forward pass,
//! computes analytic gradients by backprop, and compares every parameter
//! against a central difference.

use rand::Rng;

use crate::mat::Mat;

use super::net::{NetGrads, NetState, RecurrentNet, BLOCK_COUNT, BLOCK_NAMES};

const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// (block name, max relative error, flat index of the worst parameter)
    pub blocks: Vec<(String, f64, usize)>,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheckReport {
    /// Name of the block holding the worst disagreement.
    pub fn worst_block(&self) -> &str {
        self.blocks
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(name, _, _)| name.as_str())
            .unwrap_or("")
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (name, err, idx) in &self.blocks {
            writeln!(f, "{name:10}  max rel err {err:.3e}  (param {idx})")?;
        }
        write!(
            f,
            "overall {:.3e} vs tolerance {:.1e}: {}",
            self.max_rel_err,
            self.tolerance,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// Scalar loss: sum over steps of <weights, outputs>.
pub fn seq_loss(net: &RecurrentNet, inputs: &[Mat], weights: &[Mat]) -> f64 {
    let batch = inputs[0].rows;
    let (outs, _, _) = net.forward_seq(inputs.to_vec(), &NetState::zeros(batch, net.hidden()));
    outs.iter()
        .zip(weights.iter())
        .map(|(o, w)| o.data.iter().zip(w.data.iter()).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Analytic gradients of [`seq_loss`].
pub fn seq_loss_grads(net: &RecurrentNet, inputs: &[Mat], weights: &[Mat]) -> NetGrads {
    let batch = inputs[0].rows;
    let (_, cache, _) = net.forward_seq(inputs.to_vec(), &NetState::zeros(batch, net.hidden()));
    let (grads, _) = net.backward_seq(&cache, weights);
    grads
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

/// Compares candidate gradients against central finite differences of
/// [`seq_loss`]. The per-block report names the offending block when a check
/// fails.
pub fn compare_grads(
    net: &RecurrentNet,
    inputs: &[Mat],
    weights: &[Mat],
    candidate: &NetGrads,
    tolerance: f64,
) -> GradCheckReport {
    let mut probe = net.clone();
    let mut blocks = Vec::with_capacity(BLOCK_COUNT);
    let mut overall: f64 = 0.0;
    for b in 0..BLOCK_COUNT {
        let len = net.block(b).len();
        let mut worst = 0.0;
        let mut worst_idx = 0;
        for i in 0..len {
            let orig = probe.block(b)[i];
            probe.block_mut(b)[i] = orig + FD_STEP;
            let plus = seq_loss(&probe, inputs, weights);
            probe.block_mut(b)[i] = orig - FD_STEP;
            let minus = seq_loss(&probe, inputs, weights);
            probe.block_mut(b)[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let err = rel_err(candidate.block(b)[i], numeric);
            if err > worst {
                worst = err;
                worst_idx = i;
            }
        }
        overall = overall.max(worst);
        blocks.push((BLOCK_NAMES[b].to_string(), worst, worst_idx));
    }
    GradCheckReport { blocks, max_rel_err: overall, tolerance, pass: overall <= tolerance }
}

/// Full check: randomized inputs and loss direction, analytic backprop vs
/// central differences. Meant for small networks (<= 10^4 parameters).
pub fn grad_check(net: &RecurrentNet, tolerance: f64, rng: &mut impl Rng) -> GradCheckReport {
    assert!(net.param_count() <= 10_000, "finite differences need a small network");
    grad_check_seq_len(net, tolerance, 5, rng)
}

/// Same as [`grad_check`] with an explicit sequence length.
pub fn grad_check_seq_len(
    net: &RecurrentNet,
    tolerance: f64,
    seq_len: usize,
    rng: &mut impl Rng,
) -> GradCheckReport {
    let batch = 2;
    let inputs: Vec<Mat> = (0..seq_len)
        .map(|_| {
            Mat::from_rows(
                (0..batch)
                    .map(|_| (0..net.input_dim()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
                    .collect(),
            )
        })
        .collect();
    let weights: Vec<Mat> = (0..seq_len)
        .map(|_| {
            Mat::from_rows(
                (0..batch)
                    .map(|_| (0..net.output_dim()).map(|_| rng.gen::<f64>() * 0.4 - 0.2).collect())
                    .collect(),
            )
        })
        .collect();
    let analytic = seq_loss_grads(net, &inputs, &weights);
    compare_grads(net, &inputs, &weights, &analytic, tolerance)
}
