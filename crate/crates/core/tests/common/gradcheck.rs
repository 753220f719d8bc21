//! Randomized computation graphs checked against central finite differences.

use nsc_core::nn::{Tape, Tensor, Var};
use nsc_core::rng::Rng;

pub const FD_STEP: f64 = 1e-5;

/// Records leaf values on the first build and replays them (with overrides)
/// on later builds, so every rebuild has identical structure.
struct Leaves {
    values: Vec<Tensor>,
    cursor: usize,
    fresh: Option<Rng>,
}

impl Leaves {
    fn next(&mut self, tape: &mut Tape, shape: &[usize]) -> Var {
        if let Some(rng) = self.fresh.as_mut() {
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
            self.values.push(Tensor::new(shape.to_vec(), data).unwrap());
        }
        let t = self.values[self.cursor].clone();
        self.cursor += 1;
        tape.param(t)
    }
}

/// Builds a random graph whose structure depends only on `structure_seed`.
/// Returns the leaves and a scalar loss.
fn build(tape: &mut Tape, leaves: &mut Leaves, structure_seed: u64) -> (Vec<Var>, Var) {
    let mut s = Rng::new(structure_seed);
    let mut vars = Vec::new();
    let rows = 1 + s.below(4);
    let mut cols = 1 + s.below(4);
    let mut h = if s.below(4) == 0 {
        let vocab = 2 + s.below(4);
        let table = leaves.next(tape, &[vocab, cols]);
        vars.push(table);
        let ids: Vec<usize> = (0..rows).map(|_| s.below(vocab)).collect();
        tape.embedding(table, &ids).unwrap()
    } else {
        let x = leaves.next(tape, &[rows, cols]);
        vars.push(x);
        x
    };
    let mut cur_rows = rows;
    let steps = 2 + s.below(5);
    for _ in 0..steps {
        match s.below(17) {
            0 => {
                let k = 1 + s.below(4);
                let w = leaves.next(tape, &[cols, k]);
                vars.push(w);
                h = tape.matmul(h, w).unwrap();
                cols = k;
            }
            1 => {
                let k = 1 + s.below(4);
                let w = leaves.next(tape, &[k, cols]);
                vars.push(w);
                h = tape.matmul_t(h, w).unwrap();
                cols = k;
            }
            2 => {
                let b = leaves.next(tape, &[cols]);
                vars.push(b);
                h = tape.add(h, b).unwrap();
            }
            3 => {
                let b = leaves.next(tape, &[cur_rows, cols]);
                vars.push(b);
                h = tape.sub(h, b).unwrap();
            }
            4 => {
                let b = leaves.next(tape, &[cur_rows, cols]);
                vars.push(b);
                h = tape.mul(h, b).unwrap();
            }
            5 => {
                let b = leaves.next(tape, &[1]);
                vars.push(b);
                h = tape.mul(h, b).unwrap();
            }
            6 => h = tape.sigmoid(h).unwrap(),
            7 => h = tape.tanh(h).unwrap(),
            8 => h = tape.relu(h).unwrap(),
            9 => h = tape.softmax(h).unwrap(),
            10 if cols >= 2 => h = tape.layer_norm(h).unwrap(),
            11 => {
                h = tape.transpose(h).unwrap();
                std::mem::swap(&mut cur_rows, &mut cols);
            }
            12 if cols >= 2 => {
                let start = s.below(cols - 1);
                let len = 1 + s.below(cols - start);
                h = tape.narrow_cols(h, start, len).unwrap();
                cols = len;
            }
            13 => {
                let other = tape.tanh(h).unwrap();
                h = tape.concat_cols(&[h, other]).unwrap();
                cols *= 2;
            }
            14 => h = tape.gelu(h).unwrap(),
            15 => {
                let c = -1.5 + 3.0 * s.uniform();
                h = tape.scale(h, c).unwrap();
            }
            _ => {
                let flat = tape.reshape(h, &[cur_rows * cols]).unwrap();
                let n = cur_rows * cols;
                let take = 1 + s.below(n);
                let off = s.below(n - take + 1);
                h = tape.slice(flat, off, &[1, take]).unwrap();
                cur_rows = 1;
                cols = take;
            }
        }
    }
    let loss = match s.below(3) {
        0 => {
            let t = leaves.next(tape, &[cur_rows, cols]);
            vars.push(t);
            tape.mse(h, t).unwrap()
        }
        1 => tape.sum(h).unwrap(),
        _ => tape.mean(h).unwrap(),
    };
    (vars, loss)
}

fn loss_with(values: &[Tensor], structure_seed: u64) -> f64 {
    let mut tape = Tape::new();
    let mut leaves = Leaves {
        values: values.to_vec(),
        cursor: 0,
        fresh: None,
    };
    let (_, loss) = build(&mut tape, &mut leaves, structure_seed);
    tape.value(loss).item()
}

/// Maximum relative error between backward gradients and central finite
/// differences over every leaf entry of one random graph.
pub fn random_graph_max_rel_error(seed: u64) -> f64 {
    let mut tape = Tape::new();
    let mut leaves = Leaves {
        values: Vec::new(),
        cursor: 0,
        fresh: Some(Rng::derive(seed, &[1])),
    };
    let structure_seed = nsc_core::rng::derive_seed(seed, &[0]);
    let (vars, loss) = build(&mut tape, &mut leaves, structure_seed);
    let grads = tape.backward(loss).unwrap();
    let base = leaves.values.clone();
    let mut worst: f64 = 0.0;
    for (li, &v) in vars.iter().enumerate() {
        let analytic = grads.get(v).unwrap().data().to_vec();
        for (j, &a) in analytic.iter().enumerate() {
            let mut plus = base.clone();
            plus[li].data_mut()[j] += FD_STEP;
            let mut minus = base.clone();
            minus[li].data_mut()[j] -= FD_STEP;
            let numeric = (loss_with(&plus, structure_seed) - loss_with(&minus, structure_seed)) / (2.0 * FD_STEP);
            let denom = a.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    worst
}
