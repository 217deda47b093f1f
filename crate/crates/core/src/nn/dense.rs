//! Fully connected layer.

use rand::Rng;

use crate::mat::{linear_forward, linear_grad_acc, linear_input_grad_acc, Mat};

use super::optim::he_init;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Rectifier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// [out x in]
    pub w: Mat,
    pub b: Vec<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub dw: Mat,
    pub db: Vec<f64>,
}

impl Dense {
    pub fn new(input_dim: usize, output_dim: usize, act: Activation, rng: &mut impl Rng) -> Self {
        Dense { w: he_init(input_dim, output_dim, rng), b: vec![0.0; output_dim], act }
    }

    pub fn zeros(input_dim: usize, output_dim: usize, act: Activation) -> Self {
        Dense { w: Mat::zeros(output_dim, input_dim), b: vec![0.0; output_dim], act }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows
    }

    /// y = act(W x + b), batched over rows of `x`.
    pub fn forward(&self, x: &Mat) -> Mat {
        let mut y = Mat::zeros(x.rows, self.output_dim());
        linear_forward(x, &self.w, &self.b, &mut y);
        if self.act == Activation::Rectifier {
            for v in y.data.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        y
    }

    /// Accumulates parameter gradients and input gradients.
    ///
    /// `x` is the cached input, `y` the cached output (needed for the
    /// rectifier mask), `dy` the gradient w.r.t. the output.
    pub fn backward(&self, x: &Mat, y: &Mat, dy: &Mat, grads: &mut DenseGrads, dx: &mut Mat) {
        self.backward_impl(x, y, dy, grads, dx, true);
    }

    pub(crate) fn backward_impl(
        &self,
        x: &Mat,
        y: &Mat,
        dy: &Mat,
        grads: &mut DenseGrads,
        dx: &mut Mat,
        want_params: bool,
    ) {
        let dpre = match self.act {
            Activation::Identity => dy.clone(),
            Activation::Rectifier => {
                let mut d = dy.clone();
                for (g, &out) in d.data.iter_mut().zip(y.data.iter()) {
                    if out <= 0.0 {
                        *g = 0.0;
                    }
                }
                d
            }
        };
        if want_params {
            linear_grad_acc(&dpre, x, &mut grads.dw, &mut grads.db);
        }
        linear_input_grad_acc(&dpre, &self.w, dx);
    }
}

impl DenseGrads {
    pub fn zeros_like(layer: &Dense) -> Self {
        DenseGrads { dw: Mat::zeros(layer.w.rows, layer.w.cols), db: vec![0.0; layer.b.len()] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layer_weight_grad_is_outer_product_of_ones_and_input() {
        // loss = sum of outputs: dW = ones  (x) input
        let layer = Dense {
            w: Mat::from_rows(vec![vec![0.2, -0.3], vec![0.5, 0.1]]),
            b: vec![0.0, 0.0],
            act: Activation::Identity,
        };
        let x = Mat::from_rows(vec![vec![2.0, -1.0]]);
        let y = layer.forward(&x);
        let dy = Mat::from_rows(vec![vec![1.0, 1.0]]);
        let mut grads = DenseGrads::zeros_like(&layer);
        let mut dx = Mat::zeros(1, 2);
        layer.backward(&x, &y, &dy, &mut grads, &mut dx);
        assert_eq!(grads.dw.row(0), &[2.0, -1.0]);
        assert_eq!(grads.dw.row(1), &[2.0, -1.0]);
        assert_eq!(grads.db, vec![1.0, 1.0]);
    }

    #[test]
    fn rectifier_masks_negative_units() {
        let layer = Dense {
            w: Mat::from_rows(vec![vec![1.0], vec![-1.0]]),
            b: vec![0.0, 0.0],
            act: Activation::Rectifier,
        };
        let x = Mat::from_rows(vec![vec![3.0]]);
        let y = layer.forward(&x);
        assert_eq!(y.row(0), &[3.0, 0.0]);
        let dy = Mat::from_rows(vec![vec![1.0, 1.0]]);
        let mut grads = DenseGrads::zeros_like(&layer);
        let mut dx = Mat::zeros(1, 1);
        layer.backward(&x, &y, &dy, &mut grads, &mut dx);
        assert_eq!(grads.dw.row(1), &[0.0], "masked unit contributes nothing");
        assert_eq!(dx.row(0), &[1.0]);
    }
}
