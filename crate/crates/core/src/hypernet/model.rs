use super::{HypernetError, Vocab, PAD_ID};
use crate::nn::{NnError, ParamId, ParamSet, Tape, Tensor, Var};
use crate::rng::Rng;
use crate::surrogate::{ParamVector, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub feed_forward: usize,
    pub max_positions: usize,
}

impl Default for EncoderConfig {
    /// BERT-Tiny dimensions.
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 128,
            heads: 2,
            feed_forward: 512,
            max_positions: 512,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), HypernetError> {
        if self.layers == 0 || self.hidden == 0 || self.heads == 0 || self.feed_forward == 0 || self.max_positions == 0 {
            return Err(HypernetError::Config("encoder dimensions must be positive".into()));
        }
        if self.hidden % self.heads != 0 {
            return Err(HypernetError::Config(format!(
                "hidden size {} is not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct LayerIds {
    wq: ParamId,
    bq: ParamId,
    wk: ParamId,
    bk: ParamId,
    wv: ParamId,
    bv: ParamId,
    wo: ParamId,
    bo: ParamId,
    ln1_g: ParamId,
    ln1_b: ParamId,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
}

#[derive(Clone, Debug)]
struct Ids {
    tok: ParamId,
    pos: ParamId,
    emb_g: ParamId,
    emb_b: ParamId,
    layers: Vec<LayerIds>,
    head_w: ParamId,
    head_b: ParamId,
}

const MASK: f64 = -1e9;
const INIT_STD: f64 = 0.02;

/// Program-text-to-surrogate-weights model: a post-LN transformer encoder
/// read out at [CLS] through a linear head.
#[derive(Clone, Debug)]
pub struct HypernetModel {
    vocab: Vocab,
    config: EncoderConfig,
    topology: Topology,
    params: ParamSet,
    ids: Ids,
}

fn normal(shape: &[usize], std: f64, rng: &mut Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.normal() * std).collect()).unwrap()
}

fn declare(params: &mut ParamSet, cfg: &EncoderConfig, vocab: usize, out: usize, mut init: impl FnMut(&str, &[usize]) -> Tensor) -> Ids {
    let (h, f) = (cfg.hidden, cfg.feed_forward);
    let mut add = |p: &mut ParamSet, name: String, shape: &[usize]| {
        let t = init(&name, shape);
        p.add(name, t)
    };
    let tok = add(params, "embeddings.token".into(), &[vocab, h]);
    let pos = add(params, "embeddings.position".into(), &[cfg.max_positions, h]);
    let emb_g = add(params, "embeddings.norm.gain".into(), &[h]);
    let emb_b = add(params, "embeddings.norm.bias".into(), &[h]);
    let mut layers = Vec::new();
    for l in 0..cfg.layers {
        let n = |s: &str| format!("layer{l}.{s}");
        layers.push(LayerIds {
            wq: add(params, n("query.weight"), &[h, h]),
            bq: add(params, n("query.bias"), &[h]),
            wk: add(params, n("key.weight"), &[h, h]),
            bk: add(params, n("key.bias"), &[h]),
            wv: add(params, n("value.weight"), &[h, h]),
            bv: add(params, n("value.bias"), &[h]),
            wo: add(params, n("attn_out.weight"), &[h, h]),
            bo: add(params, n("attn_out.bias"), &[h]),
            ln1_g: add(params, n("attn_norm.gain"), &[h]),
            ln1_b: add(params, n("attn_norm.bias"), &[h]),
            w1: add(params, n("ff_in.weight"), &[f, h]),
            b1: add(params, n("ff_in.bias"), &[f]),
            w2: add(params, n("ff_out.weight"), &[h, f]),
            b2: add(params, n("ff_out.bias"), &[h]),
            ln2_g: add(params, n("ff_norm.gain"), &[h]),
            ln2_b: add(params, n("ff_norm.bias"), &[h]),
        });
    }
    let head_w = add(params, "head.weight".into(), &[out, h]);
    let head_b = add(params, "head.bias".into(), &[out]);
    Ids {
        tok,
        pos,
        emb_g,
        emb_b,
        layers,
        head_w,
        head_b,
    }
}

impl HypernetModel {
    /// Fresh model. Encoder weights are N(0, 0.02), norms start at the
    /// identity, and the head bias is a He-initialized surrogate, so an
    /// untrained model compiles every program to roughly a random init.
    pub fn new(vocab: Vocab, config: EncoderConfig, topology: Topology, rng: &mut Rng) -> Result<Self, HypernetError> {
        config.validate()?;
        let out = topology.param_count();
        let mut he_rng = rng.child(&[0xbea5]);
        let he_bias = crate::baselines::random_init(&topology, &mut he_rng).into_values();
        let mut params = ParamSet::new();
        let ids = declare(&mut params, &config, vocab.len(), out, |name, shape| {
            if name == "head.bias" {
                Tensor::vector(he_bias.clone())
            } else if name.ends_with("gain") {
                Tensor::filled(shape, 1.0)
            } else if name.ends_with("bias") {
                Tensor::zeros(shape)
            } else {
                normal(shape, INIT_STD, rng)
            }
        });
        Ok(Self {
            vocab,
            config,
            topology,
            params,
            ids,
        })
    }

    /// Reassembles a model from tensors in declaration order.
    pub fn from_parts(vocab: Vocab, config: EncoderConfig, topology: Topology, tensors: Vec<Tensor>) -> Result<Self, HypernetError> {
        config.validate()?;
        let mut params = ParamSet::new();
        let mut it = tensors.into_iter();
        let mut bad = None;
        let ids = declare(&mut params, &config, vocab.len(), topology.param_count(), |name, shape| match it.next() {
            Some(t) if t.shape() == shape => t,
            other => {
                bad.get_or_insert(format!(
                    "tensor {name}: expected shape {shape:?}, found {:?}",
                    other.map(|t| t.shape().to_vec())
                ));
                Tensor::zeros(shape)
            }
        });
        if let Some(msg) = bad {
            return Err(HypernetError::BadCheckpoint(msg));
        }
        if it.next().is_some() {
            return Err(HypernetError::BadCheckpoint("trailing tensors".into()));
        }
        Ok(Self {
            vocab,
            config,
            topology,
            params,
            ids,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn check_ids(&self, ids: &[usize]) -> Result<(), HypernetError> {
        if ids.is_empty() {
            return Err(HypernetError::Config("empty token sequence".into()));
        }
        if ids.len() > self.config.max_positions {
            return Err(HypernetError::TooLong {
                len: ids.len(),
                max: self.config.max_positions,
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.vocab.len()) {
            return Err(HypernetError::IdOutOfRange {
                id: bad,
                size: self.vocab.len(),
            });
        }
        Ok(())
    }

    fn norm(tape: &mut Tape, x: Var, g: Var, b: Var) -> Result<Var, NnError> {
        let n = tape.layer_norm(x)?;
        let n = tape.mul(n, g)?;
        tape.add(n, b)
    }

    fn dense(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let y = tape.matmul_t(x, w)?;
        tape.add(y, b)
    }

    /// Records the encoder on `tape` with parameters `vars` (from
    /// [`ParamSet::bind`]) and returns the [CLS] hidden state `[1 x hidden]`.
    pub fn encode_graph(&self, tape: &mut Tape, vars: &[Var], ids: &[usize]) -> Result<Var, HypernetError> {
        self.check_ids(ids)?;
        let v = |id: ParamId| vars[id.index()];
        let t = ids.len();
        let (h, heads) = (self.config.hidden, self.config.heads);
        let dh = h / heads;
        let positions: Vec<usize> = (0..t).collect();
        let tok = tape.embedding(v(self.ids.tok), ids)?;
        let pos = tape.embedding(v(self.ids.pos), &positions)?;
        let mut x = tape.add(tok, pos)?;
        x = Self::norm(tape, x, v(self.ids.emb_g), v(self.ids.emb_b))?;
        let mask: Vec<f64> = ids.iter().map(|&i| if i == PAD_ID { MASK } else { 0.0 }).collect();
        let mask = tape.constant(Tensor::vector(mask));
        let scale = 1.0 / (dh as f64).sqrt();
        for l in &self.ids.layers {
            let q = Self::dense(tape, x, v(l.wq), v(l.bq))?;
            let k = Self::dense(tape, x, v(l.wk), v(l.bk))?;
            let val = Self::dense(tape, x, v(l.wv), v(l.bv))?;
            let mut ctx = Vec::with_capacity(heads);
            for hd in 0..heads {
                let qh = tape.narrow_cols(q, hd * dh, dh)?;
                let kh = tape.narrow_cols(k, hd * dh, dh)?;
                let vh = tape.narrow_cols(val, hd * dh, dh)?;
                let s = tape.matmul_t(qh, kh)?;
                let s = tape.scale(s, scale)?;
                let s = tape.add(s, mask)?;
                let a = tape.softmax(s)?;
                ctx.push(tape.matmul(a, vh)?);
            }
            let c = if heads == 1 { ctx[0] } else { tape.concat_cols(&ctx)? };
            let attn = Self::dense(tape, c, v(l.wo), v(l.bo))?;
            let r = tape.add(x, attn)?;
            x = Self::norm(tape, r, v(l.ln1_g), v(l.ln1_b))?;
            let f = Self::dense(tape, x, v(l.w1), v(l.b1))?;
            let f = tape.gelu(f)?;
            let f = Self::dense(tape, f, v(l.w2), v(l.b2))?;
            let r = tape.add(x, f)?;
            x = Self::norm(tape, r, v(l.ln2_g), v(l.ln2_b))?;
        }
        Ok(tape.slice(x, 0, &[1, h])?)
    }

    /// Records encoder and head, returning the flat surrogate parameters.
    pub fn compile_graph(&self, tape: &mut Tape, vars: &[Var], ids: &[usize]) -> Result<Var, HypernetError> {
        let cls = self.encode_graph(tape, vars, ids)?;
        let out = Self::dense(tape, cls, vars[self.ids.head_w.index()], vars[self.ids.head_b.index()])?;
        Ok(tape.reshape(out, &[self.topology.param_count()])?)
    }

    /// [CLS] embedding of an encoded id sequence.
    pub fn encode(&self, ids: &[usize]) -> Result<Vec<f64>, HypernetError> {
        let mut tape = Tape::new();
        let vars = self.constants(&mut tape);
        let cls = self.encode_graph(&mut tape, &vars, ids)?;
        Ok(tape.value(cls).data().to_vec())
    }

    pub fn compile_ids(&self, ids: &[usize]) -> Result<ParamVector, HypernetError> {
        let mut tape = Tape::new();
        let vars = self.constants(&mut tape);
        let out = self.compile_graph(&mut tape, &vars, ids)?;
        Ok(ParamVector::new(tape.value(out).data().to_vec()))
    }

    pub fn compile_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Result<ParamVector, HypernetError> {
        self.compile_ids(&self.vocab.encode(tokens)?)
    }

    /// Surrogate parameters for C source text.
    pub fn compile(&self, source: &str) -> Result<ParamVector, HypernetError> {
        self.compile_ids(&self.vocab.encode_source(source)?)
    }

    fn constants(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.tensors().iter().map(|t| tape.constant(t.clone())).collect()
    }
}
