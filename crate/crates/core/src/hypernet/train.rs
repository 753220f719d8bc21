use super::{EncoderConfig, HypernetError, HypernetModel, Vocab, DEFAULT_VOCAB_SIZE};
use crate::corpus::ProgramRecord;
use crate::nn::{Adam, AdamConfig, Tape, Tensor};
use crate::rng::Rng;
use crate::surrogate::{forward_graph, PaddingMode, Topology};

#[derive(Clone, Debug, PartialEq)]
pub struct HypernetTrainConfig {
    pub program_batch: usize,
    pub input_batch: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub padding: PaddingMode,
    pub seed: u64,
    pub vocab_size: usize,
}

impl Default for HypernetTrainConfig {
    fn default() -> Self {
        Self {
            program_batch: 32,
            input_batch: 1024,
            learning_rate: 5e-5,
            epochs: 1500,
            padding: PaddingMode::RandomPad,
            seed: 0,
            vocab_size: DEFAULT_VOCAB_SIZE,
        }
    }
}

impl HypernetTrainConfig {
    fn validate(&self) -> Result<(), HypernetError> {
        if self.program_batch == 0 || self.input_batch == 0 || !(self.learning_rate > 0.0) {
            return Err(HypernetError::Config("batch sizes and learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss per epoch over the batches that were applied.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub skipped_batches: usize,
    /// Scalar count held in optimizer state at every step.
    pub optimizer_numel: usize,
}

fn sample(record: &ProgramRecord, input_batch: usize, padding: PaddingMode, rng: &mut Rng) -> Result<(Tensor, Tensor), HypernetError> {
    if record.train_io().is_empty() {
        return Err(HypernetError::NoRows(record.id.clone()));
    }
    let d = record.sample_batch(input_batch, padding, rng)?;
    let rows = d.rows();
    Ok((Tensor::matrix(rows, d.width, d.inputs)?, Tensor::matrix(rows, 1, d.targets)?))
}

/// Builds a vocabulary from `records` and trains a fresh model on them.
pub fn train(
    records: &[ProgramRecord],
    encoder: EncoderConfig,
    cfg: &HypernetTrainConfig,
) -> Result<(HypernetModel, TrainReport), HypernetError> {
    if records.is_empty() {
        return Err(HypernetError::EmptyCorpus);
    }
    let lists: Vec<Vec<String>> = records.iter().map(|r| r.tokens.clone()).collect();
    let vocab = Vocab::from_token_lists(&lists, cfg.vocab_size)?;
    let mut rng = Rng::derive(cfg.seed, &[0x1417]);
    let mut model = HypernetModel::new(vocab, encoder, Topology::covering(), &mut rng)?;
    let report = train_model(&mut model, records, cfg)?;
    Ok((model, report))
}

/// Continues training `model` on `records`.
pub fn train_model(
    model: &mut HypernetModel,
    records: &[ProgramRecord],
    cfg: &HypernetTrainConfig,
) -> Result<TrainReport, HypernetError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(HypernetError::EmptyCorpus);
    }
    let seqs: Vec<Vec<usize>> = records
        .iter()
        .map(|r| model.vocab().encode(&r.tokens))
        .collect::<Result<_, _>>()?;
    let topo = model.topology().clone();
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.learning_rate), model.params());
    let mut rng = Rng::derive(cfg.seed, &[0x7124]);
    let mut report = TrainReport {
        optimizer_numel: adam.tracked_numel(),
        ..TrainReport::default()
    };
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut consecutive_bad = 0;
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        let mut applied = 0usize;
        for batch in order.chunks(cfg.program_batch) {
            let mut acc: Vec<Tensor> = model.params().tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
            let mut batch_loss = 0.0;
            let mut finite = true;
            for &p in batch {
                let (x, y) = sample(&records[p], cfg.input_batch, cfg.padding, &mut rng)?;
                let mut tape = Tape::new();
                let vars = model.params().bind(&mut tape);
                let flat = model.compile_graph(&mut tape, &vars, &seqs[p])?;
                let xv = tape.constant(x);
                let yv = tape.constant(y);
                let pred = forward_graph(&mut tape, &topo, flat, xv)?;
                let loss = tape.mse(pred, yv)?;
                let l = tape.value(loss).item();
                if !l.is_finite() {
                    finite = false;
                    break;
                }
                let grads = tape.backward(loss)?;
                for (a, &v) in acc.iter_mut().zip(&vars) {
                    if let Some(g) = grads.get(v) {
                        a.data_mut().iter_mut().zip(g.data()).for_each(|(s, d)| *s += d);
                    }
                }
                batch_loss += l;
            }
            let finite = finite && acc.iter().all(Tensor::all_finite);
            if !finite {
                report.skipped_batches += 1;
                consecutive_bad += 1;
                log::warn!("skipping batch with non-finite loss");
                if consecutive_bad >= 3 {
                    return Err(HypernetError::NonFiniteAbort(consecutive_bad));
                }
                continue;
            }
            consecutive_bad = 0;
            let inv = 1.0 / batch.len() as f64;
            for a in &mut acc {
                a.data_mut().iter_mut().for_each(|v| *v *= inv);
            }
            let refs: Vec<Option<&Tensor>> = acc.iter().map(Some).collect();
            adam.step_with(model.params_mut(), &refs)?;
            debug_assert_eq!(adam.tracked_numel(), report.optimizer_numel);
            report.steps += 1;
            sum += batch_loss * inv;
            applied += 1;
        }
        report.epoch_losses.push(if applied > 0 { sum / applied as f64 } else { f64::NAN });
    }
    Ok(report)
}

/// Mean over `records` of the MSE of each compiled surrogate on its train
/// rows.
pub fn mean_compiled_loss(
    model: &HypernetModel,
    records: &[ProgramRecord],
    padding: PaddingMode,
    seed: u64,
) -> Result<f64, HypernetError> {
    let mut rng = Rng::derive(seed, &[0xe7a1]);
    let mut sum = 0.0;
    for r in records {
        let (x, y) = sample(r, usize::MAX, padding, &mut rng)?;
        let net = crate::surrogate::SurrogateNet::interpret(model.topology(), &model.compile_tokens(&r.tokens)?)?;
        sum += net.mse(x.data(), y.data(), y.len());
    }
    Ok(sum / records.len().max(1) as f64)
}
