//! Rough kernel throughput probe. Run explicitly:
//! cargo test --release -p aoci-core --test kernel_bench -- --ignored --nocapture

use aoci_core::mat::{linear_forward, linear_grad_acc, linear_input_grad_acc, Mat};
use std::time::Instant;

#[test]
#[ignore]
fn gemm_rates() {
    let w = Mat { rows: 512, cols: 256, data: (0..512 * 256).map(|i| (i % 97) as f64 * 1e-3).collect() };
    let x = Mat { rows: 10, cols: 256, data: (0..10 * 256).map(|i| (i % 89) as f64 * 1e-3).collect() };
    let bias = vec![0.1; 512];
    let mut out = Mat::zeros(10, 512);
    let iters = 2000;
    let t = Instant::now();
    for _ in 0..iters {
        linear_forward(&x, &w, &bias, &mut out);
    }
    let dt = t.elapsed().as_secs_f64();
    let flops = iters as f64 * 2.0 * 512.0 * 256.0 * 10.0;
    println!("linear_forward: {:.2} Gflop/s", flops / dt / 1e9);

    let dy = Mat { rows: 10, cols: 512, data: (0..10 * 512).map(|i| (i % 83) as f64 * 1e-3).collect() };
    let mut dw = Mat::zeros(512, 256);
    let mut db = vec![0.0; 512];
    let t = Instant::now();
    for _ in 0..iters {
        linear_grad_acc(&dy, &x, &mut dw, &mut db);
    }
    let dt = t.elapsed().as_secs_f64();
    println!("linear_grad_acc: {:.2} Gflop/s", flops / dt / 1e9);

    let mut dx = Mat::zeros(10, 256);
    let t = Instant::now();
    for _ in 0..iters {
        linear_input_grad_acc(&dy, &w, &mut dx);
    }
    let dt = t.elapsed().as_secs_f64();
    println!("linear_input_grad_acc: {:.2} Gflop/s", flops / dt / 1e9);
}
