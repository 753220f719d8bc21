use super::{ParamVector, SurrogateError, Topology, MAX_INPUTS};
use crate::nn::{he_init, sigmoid, NnError, Tape, Tensor, Var};
use crate::rng::Rng;

/// How inputs beyond a program's arity are filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PaddingMode {
    ZeroPad,
    /// Samples from the corpus input distribution, U[-1, 1].
    RandomPad,
}

/// How a single-output surrogate is widened to `k` outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputStrategy {
    Grow,
    Reinitialize,
    Clone,
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    weight: Tensor,
    bias: Tensor,
}

/// A materialized dense MLP with sigmoid hidden layers and a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateNet {
    layers: Vec<Layer>,
}

impl SurrogateNet {
    pub fn interpret(topology: &Topology, params: &ParamVector) -> Result<Self, SurrogateError> {
        let expected = topology.param_count();
        if params.len() != expected {
            return Err(SurrogateError::WrongLength {
                expected,
                got: params.len(),
            });
        }
        let v = params.values();
        let mut off = 0;
        let mut layers = Vec::new();
        for (i, o) in topology.layers() {
            let weight = Tensor::matrix(o, i, v[off..off + i * o].to_vec())?;
            off += i * o;
            let bias = Tensor::vector(v[off..off + o].to_vec());
            off += o;
            layers.push(Layer { weight, bias });
        }
        Ok(Self { layers })
    }

    pub fn flatten(&self) -> ParamVector {
        let mut out = Vec::with_capacity(self.topology().param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(l.bias.data());
        }
        ParamVector::new(out)
    }

    pub fn topology(&self) -> Topology {
        let mut sizes = vec![self.inputs()];
        sizes.extend(self.layers.iter().map(|l| l.bias.len()));
        Topology::new(sizes).expect("layers are non-empty")
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().unwrap().bias.len()
    }

    /// Weight matrix `[out x in]` of layer `i`.
    pub fn weight(&self, i: usize) -> &Tensor {
        &self.layers[i].weight
    }

    pub fn bias(&self, i: usize) -> &Tensor {
        &self.layers[i].bias
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_rows(x, 1)
    }

    /// Evaluates `rows` inputs stored row-major in `x`.
    pub fn forward_rows(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let (o, i) = (l.weight.rows(), l.weight.cols());
            let w = l.weight.data();
            let b = l.bias.data();
            let mut next = vec![0.0; rows * o];
            for r in 0..rows {
                let xr = &h[r * i..(r + 1) * i];
                for j in 0..o {
                    let dot: f64 = xr.iter().zip(&w[j * i..(j + 1) * i]).map(|(a, c)| a * c).sum();
                    let z = dot + b[j];
                    next[r * o + j] = if li == last { z } else { sigmoid(z) };
                }
            }
            h = next;
        }
        h
    }

    /// Mean squared error over `rows` examples.
    pub fn mse(&self, x: &[f64], y: &[f64], rows: usize) -> f64 {
        if rows == 0 {
            return 0.0;
        }
        let pred = self.forward_rows(x, rows);
        pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
    }
}

/// Records the network described by the flat `params` applied to `x`
/// (`[n x inputs]`), returning `[n x outputs]`.
pub fn forward_graph(tape: &mut Tape, topology: &Topology, params: Var, x: Var) -> Result<Var, NnError> {
    let mut off = 0;
    let mut h = x;
    let n_layers = topology.layer_sizes().len() - 1;
    for (li, (i, o)) in topology.layers().enumerate() {
        let w = tape.slice(params, off, &[o, i])?;
        off += i * o;
        let b = tape.slice(params, off, &[o])?;
        off += o;
        h = tape.matmul_t(h, w)?;
        h = tape.add(h, b)?;
        if li + 1 < n_layers {
            h = tape.sigmoid(h)?;
        }
    }
    Ok(h)
}

/// Extends `raw` to the covering input width.
pub fn pad_input(raw: &[f64], mode: PaddingMode, rng: &mut Rng) -> Result<Vec<f64>, SurrogateError> {
    if raw.len() > MAX_INPUTS {
        return Err(SurrogateError::ArityTooLarge {
            arity: raw.len(),
            max: MAX_INPUTS,
        });
    }
    let mut out = raw.to_vec();
    while out.len() < MAX_INPUTS {
        out.push(match mode {
            PaddingMode::ZeroPad => 0.0,
            PaddingMode::RandomPad => rng.uniform_range(-1.0, 1.0),
        });
    }
    Ok(out)
}

/// Widens the output layer to `k` rows.
pub fn adapt_outputs(
    net: &SurrogateNet,
    k: usize,
    strategy: OutputStrategy,
    rng: &mut Rng,
) -> Result<SurrogateNet, SurrogateError> {
    if k < 1 {
        return Err(SurrogateError::ZeroOutputs);
    }
    let mut out = net.clone();
    let last = out.layers.last_mut().unwrap();
    let hidden = last.weight.cols();
    let current = last.bias.len();
    match strategy {
        OutputStrategy::Grow => {
            if k > current {
                let extra = he_init(&[k - current, hidden], rng)?;
                let mut w = last.weight.data().to_vec();
                w.extend_from_slice(extra.data());
                let mut b = last.bias.data().to_vec();
                b.resize(k, 0.0);
                last.weight = Tensor::matrix(k, hidden, w)?;
                last.bias = Tensor::vector(b);
            } else if k < current {
                last.weight = Tensor::matrix(k, hidden, last.weight.data()[..k * hidden].to_vec())?;
                last.bias = Tensor::vector(last.bias.data()[..k].to_vec());
            }
        }
        OutputStrategy::Reinitialize => {
            last.weight = he_init(&[k, hidden], rng)?;
            last.bias = Tensor::zeros(&[k]);
        }
        OutputStrategy::Clone => {
            let row = last.weight.row(0).to_vec();
            let b0 = last.bias.data()[0];
            last.weight = Tensor::matrix(k, hidden, row.repeat(k))?;
            last.bias = Tensor::vector(vec![b0; k]);
        }
    }
    Ok(out)
}

/// Drops first-layer columns `n..`, keeping the first `n` inputs.
pub fn prune_inputs(net: &SurrogateNet, n: usize) -> Result<SurrogateNet, SurrogateError> {
    let width = net.inputs();
    if n > width {
        return Err(SurrogateError::ArityTooLarge { arity: n, max: width });
    }
    let mut out = net.clone();
    let first = &mut out.layers[0];
    let rows = first.weight.rows();
    let mut w = Vec::with_capacity(rows * n);
    for r in 0..rows {
        w.extend_from_slice(&first.weight.row(r)[..n]);
    }
    first.weight = Tensor::matrix(rows, n, w)?;
    Ok(out)
}
