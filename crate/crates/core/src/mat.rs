//! Row-major f64 matrices and the handful of dense kernels the networks need.
//!
//! The kernels use fixed-width accumulator blocks so the compiler can
//! vectorize them without reassociating sums behind our back; results are
//! bit-stable on a given platform.

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}

/// Dot product over four independent 8-wide fused accumulator chains.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [[0.0f64; 8]; 4];
    let chunks = a.len() / 32;
    let (ah, at) = a.split_at(chunks * 32);
    let (bh, bt) = b.split_at(chunks * 32);
    for (ca, cb) in ah.chunks_exact(32).zip(bh.chunks_exact(32)) {
        for c in 0..4 {
            for k in 0..8 {
                acc[c][k] = ca[c * 8 + k].mul_add(cb[c * 8 + k], acc[c][k]);
            }
        }
    }
    let mut lanes = [0.0f64; 8];
    for chain in &acc {
        for k in 0..8 {
            lanes[k] += chain[k];
        }
    }
    let mut s = ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5])) + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7]));
    for (x, y) in at.iter().zip(bt.iter()) {
        s = x.mul_add(*y, s);
    }
    s
}

/// y += alpha * x
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi = xi.mul_add(alpha, *yi);
    }
}

/// out[b][o] = dot(w[o], x[b]) + bias[o]
///
/// `w` is [out_dim x in_dim], `x` is [batch x in_dim], `out` is
/// [batch x out_dim]. Four weight rows run together so each input load feeds
/// four accumulator chains.
pub fn linear_forward(x: &Mat, w: &Mat, bias: &[f64], out: &mut Mat) {
    assert_eq!(x.cols, w.cols, "input width mismatch");
    assert_eq!(out.rows, x.rows);
    assert_eq!(out.cols, w.rows);
    assert_eq!(bias.len(), w.rows);
    let quads = w.rows / 4;
    for q in 0..quads {
        let o = q * 4;
        let (w0, w1, w2, w3) = (w.row(o), w.row(o + 1), w.row(o + 2), w.row(o + 3));
        for r in 0..x.rows {
            let xr = x.row(r);
            let mut acc = [[0.0f64; 8]; 4];
            let blocks = xr.len() / 8;
            for i in 0..blocks {
                let j = i * 8;
                for k in 0..8 {
                    let xv = xr[j + k];
                    acc[0][k] = w0[j + k].mul_add(xv, acc[0][k]);
                    acc[1][k] = w1[j + k].mul_add(xv, acc[1][k]);
                    acc[2][k] = w2[j + k].mul_add(xv, acc[2][k]);
                    acc[3][k] = w3[j + k].mul_add(xv, acc[3][k]);
                }
            }
            let mut sums = [0.0f64; 4];
            for (s, a) in sums.iter_mut().zip(acc.iter()) {
                *s = ((a[0] + a[4]) + (a[1] + a[5])) + ((a[2] + a[6]) + (a[3] + a[7]));
            }
            for j in blocks * 8..xr.len() {
                sums[0] = w0[j].mul_add(xr[j], sums[0]);
                sums[1] = w1[j].mul_add(xr[j], sums[1]);
                sums[2] = w2[j].mul_add(xr[j], sums[2]);
                sums[3] = w3[j].mul_add(xr[j], sums[3]);
            }
            let orow = out.row_mut(r);
            for k in 0..4 {
                orow[o + k] = sums[k] + bias[o + k];
            }
        }
    }
    for o in quads * 4..w.rows {
        let wrow = w.row(o);
        let b = bias[o];
        for r in 0..x.rows {
            let v = dot(wrow, x.row(r)) + b;
            out.set(r, o, v);
        }
    }
}

/// dw[o] += sum_b dy[b][o] * x[b];  db[o] += sum_b dy[b][o]
pub fn linear_grad_acc(dy: &Mat, x: &Mat, dw: &mut Mat, db: &mut [f64]) {
    assert_eq!(dy.rows, x.rows);
    assert_eq!(dw.rows, dy.cols);
    assert_eq!(dw.cols, x.cols);
    assert_eq!(db.len(), dy.cols);
    for b in 0..dy.rows {
        let dyr = dy.row(b);
        let xr = x.row(b);
        for o in 0..dy.cols {
            let g = dyr[o];
            if g != 0.0 {
                axpy(g, xr, dw.row_mut(o));
                db[o] += g;
            }
        }
    }
}

/// dx[b] += sum_o dy[b][o] * w[o]
pub fn linear_input_grad_acc(dy: &Mat, w: &Mat, dx: &mut Mat) {
    assert_eq!(dy.cols, w.rows);
    assert_eq!(dx.rows, dy.rows);
    assert_eq!(dx.cols, w.cols);
    for b in 0..dy.rows {
        let dyr = dy.row(b);
        let dxr = dx.row_mut(b);
        for o in 0..w.rows {
            let g = dyr[o];
            if g != 0.0 {
                axpy(g, w.row(o), dxr);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| (i as f64) * 0.25 - 3.0).collect();
        let b: Vec<f64> = (0..37).map(|i| ((i * 7 % 11) as f64) * 0.5 - 1.0).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn linear_forward_matches_naive() {
        let x = Mat::from_rows(vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 2.0]]);
        let w = Mat::from_rows(vec![vec![0.1, 0.2, 0.3], vec![1.0, -1.0, 0.0]]);
        let bias = vec![0.5, -0.5];
        let mut out = Mat::zeros(2, 2);
        linear_forward(&x, &w, &bias, &mut out);
        assert!((out.get(0, 0) - (0.1 + 0.4 + 0.9 + 0.5)).abs() < 1e-12);
        assert!((out.get(1, 1) - (-1.0 - 0.5 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn grads_match_naive_outer_products() {
        let dy = Mat::from_rows(vec![vec![1.0, -2.0], vec![0.5, 0.25]]);
        let x = Mat::from_rows(vec![vec![2.0, 3.0], vec![-1.0, 4.0]]);
        let mut dw = Mat::zeros(2, 2);
        let mut db = vec![0.0; 2];
        linear_grad_acc(&dy, &x, &mut dw, &mut db);
        // dw[0][0] = 1*2 + 0.5*(-1) = 1.5
        assert!((dw.get(0, 0) - 1.5).abs() < 1e-12);
        // db[1] = -2 + 0.25
        assert!((db[1] + 1.75).abs() < 1e-12);

        let w = Mat::from_rows(vec![vec![0.5, 1.0], vec![2.0, -1.0]]);
        let mut dx = Mat::zeros(2, 2);
        linear_input_grad_acc(&dy, &w, &mut dx);
        // dx[0][0] = 1*0.5 + (-2)*2 = -3.5
        assert!((dx.get(0, 0) + 3.5).abs() < 1e-12);
    }
}
