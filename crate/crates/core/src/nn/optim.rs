//! He initialization, RMSprop, and exponential-moving-average blending.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::mat::Mat;

use super::net::{NetGrads, RecurrentNet, BLOCK_COUNT};

/// Weights ~ Normal(0, 2 / fan_in), laid out [fan_out x fan_in]. Biases are
/// handled separately (zero).
pub fn he_init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Mat {
    assert!(fan_in > 0 && fan_out > 0);
    let std = (2.0 / fan_in as f64).sqrt();
    let mut m = Mat::zeros(fan_out, fan_in);
    for v in m.data.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = std * z;
    }
    m
}

/// One RMSprop update on a parameter block:
/// v <- decay*v + (1-decay)*g^2;  p <- p - lr * g / (sqrt(v) + eps).
pub fn rmsprop_step(params: &mut [f64], grads: &[f64], accum: &mut [f64], lr: f64, decay: f64, eps: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), accum.len());
    for ((p, &g), v) in params.iter_mut().zip(grads.iter()).zip(accum.iter_mut()) {
        *v = decay * *v + (1.0 - decay) * g * g;
        *p -= lr * g / (v.sqrt() + eps);
    }
}

/// target <- tau*source + (1-tau)*target, elementwise.
pub fn ema_blend(target: &mut [f64], source: &[f64], tau: f64) {
    assert_eq!(target.len(), source.len());
    for (t, &s) in target.iter_mut().zip(source.iter()) {
        *t = tau * s + (1.0 - tau) * *t;
    }
}

pub fn ema_blend_net(target: &mut RecurrentNet, source: &RecurrentNet, tau: f64) {
    for i in 0..BLOCK_COUNT {
        ema_blend(target.block_mut(i), source.block(i), tau);
    }
}

/// Per-network RMSprop state.
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    accum: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(net: &RecurrentNet, lr: f64, decay: f64, eps: f64) -> Self {
        RmsProp { lr, decay, eps, accum: (0..BLOCK_COUNT).map(|i| vec![0.0; net.block(i).len()]).collect() }
    }

    pub fn step(&mut self, net: &mut RecurrentNet, grads: &NetGrads) {
        for i in 0..BLOCK_COUNT {
            rmsprop_step(net.block_mut(i), grads.block(i), &mut self.accum[i], self.lr, self.decay, self.eps);
        }
    }
}
