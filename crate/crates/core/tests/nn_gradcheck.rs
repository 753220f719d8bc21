mod common;

use common::gradcheck::{random_graph_max_rel_error, FD_STEP};
use nsc_core::nn::{he_init, Tape, Tensor};
use nsc_core::rng::Rng;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backward_matches_finite_differences(seed in any::<u64>()) {
        let err = random_graph_max_rel_error(seed);
        prop_assert!(err < 1e-4, "seed {seed}: max relative error {err}");
    }

    #[test]
    fn layer_norm_rows_standardised(data in proptest::collection::vec(-50.0f64..50.0, 8..64)) {
        let cols = 4;
        let rows = data.len() / cols;
        let data = data[..rows * cols].to_vec();
        // Skip near-constant rows, where the epsilon dominates.
        prop_assume!(data.chunks(cols).all(|r| {
            let m = r.iter().sum::<f64>() / cols as f64;
            r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / cols as f64 > 1e-3
        }));
        let mut t = Tape::new();
        let x = t.constant(Tensor::matrix(rows, cols, data).unwrap());
        let y = t.layer_norm(x).unwrap();
        for row in t.value(y).data().chunks(cols) {
            let m = row.iter().sum::<f64>() / cols as f64;
            let v = row.iter().map(|a| (a - m).powi(2)).sum::<f64>() / cols as f64;
            prop_assert!(m.abs() < 1e-10);
            prop_assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_normalised(data in proptest::collection::vec(-30.0f64..30.0, 3..60)) {
        let cols = 3;
        let rows = data.len() / cols;
        let mut t = Tape::new();
        let x = t.constant(Tensor::matrix(rows, cols, data[..rows * cols].to_vec()).unwrap());
        let y = t.softmax(x).unwrap();
        for row in t.value(y).data().chunks(cols) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

fn mlp_loss(ws: &[Tensor], x: &Tensor, y: &Tensor) -> (f64, Vec<Tensor>) {
    let mut t = Tape::new();
    let xv = t.constant(x.clone());
    let yv = t.constant(y.clone());
    let vars: Vec<_> = ws.iter().map(|w| t.param(w.clone())).collect();
    let mut h = xv;
    for (i, pair) in vars.chunks(2).enumerate() {
        h = t.matmul_t(h, pair[0]).unwrap();
        h = t.add(h, pair[1]).unwrap();
        if i + 1 < vars.len() / 2 {
            h = t.sigmoid(h).unwrap();
        }
    }
    let loss = t.mse(h, yv).unwrap();
    let g = t.backward(loss).unwrap();
    (t.value(loss).item(), vars.iter().map(|&v| g.get(v).unwrap().clone()).collect())
}

#[test]
fn three_layer_mlp_matches_finite_differences() {
    let mut rng = Rng::new(2024);
    let sizes = [5usize, 4, 4, 2];
    let mut ws = Vec::new();
    for w in sizes.windows(2) {
        ws.push(he_init(&[w[1], w[0]], &mut rng).unwrap());
        ws.push(Tensor::vector((0..w[1]).map(|_| rng.uniform_range(-0.5, 0.5)).collect()));
    }
    let x = Tensor::matrix(7, 5, (0..35).map(|_| rng.uniform_range(-2.0, 2.0)).collect()).unwrap();
    let y = Tensor::matrix(7, 2, (0..14).map(|_| rng.uniform_range(-2.0, 2.0)).collect()).unwrap();
    let (_, analytic) = mlp_loss(&ws, &x, &y);
    let mut worst: f64 = 0.0;
    for (li, g) in analytic.iter().enumerate() {
        for j in 0..g.len() {
            let mut p = ws.clone();
            p[li].data_mut()[j] += FD_STEP;
            let mut m = ws.clone();
            m[li].data_mut()[j] -= FD_STEP;
            let num = (mlp_loss(&p, &x, &y).0 - mlp_loss(&m, &x, &y).0) / (2.0 * FD_STEP);
            let a = g.data()[j];
            worst = worst.max((a - num).abs() / a.abs().max(num.abs()).max(1e-3));
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}
