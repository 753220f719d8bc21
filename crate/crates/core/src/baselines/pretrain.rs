use super::{random_init, BaselineError};
use crate::corpus::ProgramRecord;
use crate::nn::{Adam, AdamConfig, ParamSet, Tape, Tensor};
use crate::rng::Rng;
use crate::surrogate::{forward_graph, PaddingMode, ParamVector, Topology};

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainConfig {
    pub program_batch: usize,
    pub input_batch: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub padding: PaddingMode,
    pub seed: u64,
    pub topology: Topology,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            program_batch: 32,
            input_batch: 1024,
            learning_rate: 1e-5,
            epochs: 1500,
            padding: PaddingMode::RandomPad,
            seed: 0,
            topology: Topology::covering(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PretrainReport {
    /// Mean pre-update batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub skipped_batches: usize,
}

/// One surrogate trained on the pooled rows of every program, from a He
/// initialization drawn from the config seed.
pub fn pretrain(records: &[ProgramRecord], cfg: &PretrainConfig) -> Result<(ParamVector, PretrainReport), BaselineError> {
    let init = random_init(&cfg.topology, &mut Rng::derive(cfg.seed, &[0x9e7]));
    pretrain_from(&init, records, cfg)
}

pub fn pretrain_from(
    init: &ParamVector,
    records: &[ProgramRecord],
    cfg: &PretrainConfig,
) -> Result<(ParamVector, PretrainReport), BaselineError> {
    if records.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    if cfg.program_batch == 0 || cfg.input_batch == 0 || !(cfg.learning_rate > 0.0) {
        return Err(BaselineError::Config("batch sizes and learning rate must be positive".into()));
    }
    if let Some(r) = records.iter().find(|r| r.train_io().is_empty()) {
        return Err(BaselineError::NoRows(r.id.clone()));
    }
    let mut params = ParamSet::new();
    let pid = params.add("surrogate", Tensor::vector(init.values().to_vec()));
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.learning_rate), &params);
    let mut rng = Rng::derive(cfg.seed, &[0x9e8]);
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut report = PretrainReport::default();
    let mut bad = 0;
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let (mut sum, mut applied) = (0.0, 0usize);
        for batch in order.chunks(cfg.program_batch) {
            let mut tape = Tape::new();
            let vars = params.bind(&mut tape);
            let p = vars[pid.index()];
            let mut total = None;
            for &i in batch {
                let d = records[i].sample_batch(cfg.input_batch, cfg.padding, &mut rng)?;
                let rows = d.rows();
                let x = tape.constant(Tensor::matrix(rows, d.width, d.inputs)?);
                let y = tape.constant(Tensor::matrix(rows, 1, d.targets)?);
                let pred = forward_graph(&mut tape, &cfg.topology, p, x)?;
                let l = tape.mse(pred, y)?;
                total = Some(match total {
                    None => l,
                    Some(t) => tape.add(t, l)?,
                });
            }
            let loss = tape.scale(total.unwrap(), 1.0 / batch.len() as f64)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                report.skipped_batches += 1;
                bad += 1;
                log::warn!("skipping pretraining batch with non-finite loss");
                if bad >= 3 {
                    return Err(BaselineError::NonFinite(bad));
                }
                continue;
            }
            bad = 0;
            let grads = tape.backward(loss)?;
            adam.step(&mut params, &vars, &grads)?;
            report.steps += 1;
            sum += value;
            applied += 1;
        }
        report.epoch_losses.push(if applied > 0 { sum / applied as f64 } else { f64::NAN });
    }
    Ok((ParamVector::new(params.get(pid).data().to_vec()), report))
}
